//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Every tolerance and threshold is pinned below.

use std::process::ExitCode;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sharpmax::gamma::DEFAULT_RESID_TOL;
use sharpmax::sharpness::{ratio_sweep, rounds_for, sharpness_row};
use sharpmax::tree_sim::{
    check_supermartingale_u, epsilon_shift_default, exact_moments, mc_estimate,
    random_martingale_tree, random_submartingale_tree, Integrand, ItoScheme, Mode, RandomTreeSpec,
    ReflectedWalk, TreeSampler,
};
use sharpmax::verify::{
    check_gamma_properties, check_inverse_consistency, run_suite, GammaTolerances, SuiteOptions,
};
use sharpmax::{solve_gamma, GammaSolution, Params};

const PS: [f64; 4] = [2.0, 2.5, 3.0, 4.0];
const ALPHAS: [f64; 3] = [0.25, 0.5, 1.0];

// criterion 1
const C1_LINEAR_TOL: f64 = 1e-10;
const C1_SECOND_DIFF_TOL: f64 = 1e-8;
const C1_SECONDS: f64 = 5.0;
// criterion 2
const C2_RESID_TOL: f64 = 1e-9;
const C2_JUNCTION_TOL: f64 = 1e-8;
const C2_WAZNE_TOL: f64 = 1e-9;
const C2_POINTS: usize = 1_000;
const C2_SECONDS: f64 = 30.0;
// criterion 3
const C3_INVERSE_TOL: f64 = 1e-9;
const C3_H_ONE_TOL: f64 = 1e-10;
const C3_H_PRIME_REL: f64 = 1e-7;
const C3_POINTS: usize = 1_000;
// criterion 4
const C4_SECONDS_PER_PAIR: f64 = 120.0;
// criterion 5
const C5_TREES: usize = 1_000;
const C5_TOL: f64 = 1e-10;
const C5_SECONDS: f64 = 60.0;
// criterion 6
const C6_TREES: usize = 1_000;
const C6_SLACK: f64 = -1e-12;
const C6_SECONDS: f64 = 60.0;
// criterion 7
const C7_DELTAS: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];
const C7_MART_HORIZON: f64 = 20.0;
const C7_MART_THRESHOLD: f64 = 1.95;
const C7_SUB_HORIZON: f64 = 40.0;
const C7_SUB_DELTA: f64 = 1e-3;
const C7_SUB_THRESHOLD: f64 = 3.6;
const C7_SECONDS: f64 = 300.0;
// criterion 8
const C8_RUNS: u64 = 100;
const C8_MIN_HITS: usize = 99;
const C8_PATHS: usize = 20_000;
const C8_SIGMAS: f64 = 3.0;
// criterion 9
const C9_PATHS: usize = 100_000;
const C9_STEPS: usize = 1_000;
const C9_SIGMAS: f64 = 3.0;
const C9_HALVING_REL: f64 = 0.02;
const C9_SECONDS: f64 = 180.0;

type Outcome = (bool, String);
type Criterion = fn() -> Outcome;

fn solve(p: f64, alpha: f64) -> GammaSolution {
    let params = Params::new(p, alpha).expect("params");
    let x_max = sharpmax::gamma::default_x_max(&params);
    solve_gamma(params, x_max, DEFAULT_RESID_TOL).expect("solve")
}

fn c1() -> Outcome {
    let start = Instant::now();
    let sol = solve(3.0, 1.0);
    let rows = sol.table(0.0, 10.0, 0.01).expect("table");
    let linear_dev = rows
        .iter()
        .filter(|r| r[0] <= 1.0 / 6.0)
        .map(|r| (r[1] - (1.0 / 3.0 + 3.0 * r[0])).abs())
        .fold(0.0, f64::max);
    let at_zero = (rows[0][1] - 1.0 / 3.0).abs();
    let at_x0 = (sol.gamma(1.0 / 6.0).unwrap() - 5.0 / 6.0).abs();
    let curved: Vec<f64> = rows
        .iter()
        .filter(|r| r[0] >= 1.0 / 6.0)
        .map(|r| r[1])
        .collect();
    let max_second = curved
        .windows(3)
        .map(|w| w[0] - 2.0 * w[1] + w[2])
        .fold(f64::NEG_INFINITY, f64::max);
    let min_step = curved
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let max_gamma = curved.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let secs = start.elapsed().as_secs_f64();
    let ok = linear_dev <= C1_LINEAR_TOL
        && at_zero <= C1_LINEAR_TOL
        && at_x0 <= C1_LINEAR_TOL
        && max_second <= C1_SECOND_DIFF_TOL
        && min_step >= 0.0
        && max_gamma < 1.0
        && secs <= C1_SECONDS;
    (
        ok,
        format!(
            "linear dev {linear_dev:.1e}, |γ(0)-1/3| {at_zero:.1e}, |γ(1/6)-5/6| {at_x0:.1e}, \
             max 2nd diff {max_second:.1e}, min step {min_step:.1e}, max γ {max_gamma:.6}, {secs:.2} s"
        ),
    )
}

/// `γ'(1 + C(1-γ)x^(p-1)) - (-1 + C(1-γ)γx^(p-2))` straight from the formula.
fn residual_oracle(sol: &GammaSolution, x: f64) -> f64 {
    let pr = sol.params();
    let (p, a) = (pr.p(), pr.alpha());
    let c = ((a + 1.0) * p).powf(p) * (p - 1.0);
    let eps = sol.deficit(x).unwrap();
    let (g, dg) = sol.eval(x).unwrap();
    dg * (1.0 + c * eps * x.powf(p - 1.0)) - (-1.0 + c * eps * g * x.powf(p - 2.0))
}

fn c2() -> Outcome {
    let start = Instant::now();
    let tol = GammaTolerances {
        resid: C2_RESID_TOL,
        wazne: C2_WAZNE_TOL,
        junction: C2_JUNCTION_TOL,
        ..GammaTolerances::default()
    };
    let (mut worst_resid, mut worst_junction, mut worst_wazne) = (0.0f64, 0.0f64, f64::MIN);
    let mut failed = Vec::new();
    for p in PS {
        for alpha in ALPHAS {
            let sol = solve(p, alpha);
            let report = check_gamma_properties(&sol, C2_POINTS, 2, &tol).unwrap();
            if !report.passed() {
                failed.push(format!("({p},{alpha})"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let x0 = 1.0 / ((alpha + 1.0) * p);
            for _ in 0..C2_POINTS {
                let x = x0 + (sol.x_max() - x0) * rand::Rng::random::<f64>(&mut rng);
                worst_resid = worst_resid.max(residual_oracle(&sol, x).abs());
                let (g, dg) = sol.eval(x).unwrap();
                worst_wazne = worst_wazne.max((p - 2.0) * (1.0 - g) - x * dg);
            }
            let slope = (p - 1.0) * (alpha + 1.0) - 1.0;
            let (left, right) = sol.junction_slopes();
            worst_junction = worst_junction
                .max((left - slope).abs())
                .max((right - slope).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = failed.is_empty()
        && worst_resid <= C2_RESID_TOL
        && worst_junction <= C2_JUNCTION_TOL
        && worst_wazne <= C2_WAZNE_TOL
        && secs <= C2_SECONDS;
    (
        ok,
        format!(
            "12 pairs, residual {worst_resid:.1e}, junction {worst_junction:.1e}, \
             wazne slack {worst_wazne:.1e}, failed reports {failed:?}, {secs:.2} s"
        ),
    )
}

fn c3() -> Outcome {
    let tol = GammaTolerances {
        inverse: C3_INVERSE_TOL,
        h_at_one: C3_H_ONE_TOL,
        h_prime_rel: C3_H_PRIME_REL,
        bounds: 0.0,
        ..GammaTolerances::default()
    };
    let (mut worst_h_one, mut worst_bounds) = (0.0f64, f64::MIN);
    let mut failed = Vec::new();
    for p in PS {
        for alpha in ALPHAS {
            let sol = solve(p, alpha);
            let report = check_inverse_consistency(&sol, C3_POINTS, 3, &tol).unwrap();
            if !report.passed() {
                failed.push(format!("({p},{alpha}) {}", report.worst_location));
            }
            worst_h_one = worst_h_one.max((sol.h(1.0).unwrap() - 1.0 / ((alpha + 1.0) * p)).abs());
            for i in 0..C3_POINTS {
                let s = 1.0 + (sol.s_max() - 1.0) * (i as f64 + 0.5) / C3_POINTS as f64;
                let h = sol.h(s).unwrap();
                worst_bounds = worst_bounds.max((s - 1.0) - h).max(h - s);
            }
        }
    }
    let ok = failed.is_empty() && worst_h_one <= C3_H_ONE_TOL && worst_bounds <= 0.0;
    (
        ok,
        format!(
            "12 pairs, |h(1)-x0| {worst_h_one:.1e}, bound excess {worst_bounds:.1e}, failed {failed:?}"
        ),
    )
}

fn c4() -> Outcome {
    let opts = SuiteOptions::default();
    let mut worst_secs = 0.0f64;
    let mut failed = Vec::new();
    for p in PS {
        for alpha in ALPHAS {
            let start = Instant::now();
            let sol = solve(p, alpha);
            for r in run_suite(&sol, &opts).unwrap() {
                if !r.passed() {
                    failed.push(format!(
                        "({p},{alpha}) {} {:e}",
                        r.check_name, r.worst_slack
                    ));
                }
            }
            worst_secs = worst_secs.max(start.elapsed().as_secs_f64());
        }
    }
    let ok = failed.is_empty() && worst_secs <= C4_SECONDS_PER_PAIR;
    (
        ok,
        format!(
            "12 pairs x 10 checks at {} grid points, failed {failed:?}, slowest pair {worst_secs:.2} s",
            opts.grid.nx * opts.grid.ny
        ),
    )
}

fn c5() -> Outcome {
    let start = Instant::now();
    let spec = RandomTreeSpec {
        f0_range: (0.5, 2.0),
        g0_ratio: (0.25, 1.0),
        ..RandomTreeSpec::default()
    };
    let pairs = [(2.0, 1.0), (3.0, 0.5), (4.0, 0.25)];
    let sols: Vec<GammaSolution> = pairs.iter().map(|&(p, a)| solve(p, a)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst, mut worst_init, mut bad) = (f64::MIN, f64::MIN, 0usize);
    for i in 0..C5_TREES {
        let k = i % pairs.len();
        let tree = random_submartingale_tree(&mut rng, &spec, pairs[k].1).unwrap();
        let tree = epsilon_shift_default(&tree).unwrap();
        let report = check_supermartingale_u(&tree, &sols[k], C5_TOL).unwrap();
        for c in &report.components {
            match c.check_name.as_str() {
                "initial_value" => worst_init = worst_init.max(c.worst_slack),
                _ => worst = worst.max(c.worst_slack),
            }
        }
        bad += usize::from(!report.passed());
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = bad == 0 && worst <= C5_TOL && worst_init <= C5_TOL && secs <= C5_SECONDS;
    (
        ok,
        format!(
            "{C5_TREES} trees, max violation {worst:.1e}, max U(f0,g0,|g0|) {worst_init:.1e}, \
             failing trees {bad}, {secs:.2} s"
        ),
    )
}

fn c6() -> Outcome {
    let start = Instant::now();
    let spec = RandomTreeSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut min_mart, mut min_sub) = (f64::MAX, f64::MAX);
    for i in 0..C6_TREES {
        let p = PS[i % PS.len()];
        let alpha = ALPHAS[i % ALPHAS.len()];
        let t = random_martingale_tree(&mut rng, &spec).unwrap();
        min_mart = min_mart.min(p - exact_moments(&t, p).unwrap().ratio);
        let t = random_submartingale_tree(&mut rng, &spec, alpha).unwrap();
        min_sub = min_sub.min((alpha + 1.0) * p - exact_moments(&t, p).unwrap().ratio);
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = min_mart >= C6_SLACK && min_sub >= C6_SLACK && secs <= C6_SECONDS;
    (
        ok,
        format!(
            "{C6_TREES} trees per mode, min slack martingale {min_mart:.3}, \
             submartingale {min_sub:.3}, {secs:.2} s"
        ),
    )
}

fn c7() -> Outcome {
    let start = Instant::now();
    let cases = |h: f64| -> Vec<(f64, usize)> {
        C7_DELTAS.iter().map(|&d| (d, rounds_for(d, h))).collect()
    };
    let mart = ratio_sweep(Mode::Martingale, 2.0, &cases(C7_MART_HORIZON)).unwrap();
    let sub_mode = Mode::Submartingale { alpha: 1.0 };
    let sub = ratio_sweep(sub_mode, 2.0, &cases(C7_SUB_HORIZON)).unwrap();
    let sub_small = sharpness_row(
        sub_mode,
        2.0,
        C7_SUB_DELTA,
        rounds_for(C7_SUB_DELTA, C7_SUB_HORIZON),
    )
    .unwrap();
    let increasing =
        |r: &[sharpmax::sharpness::SharpnessRow]| r.windows(2).all(|w| w[1].ratio > w[0].ratio);
    let mart_last = mart.last().unwrap().ratio;
    let sub_ratios: Vec<f64> = sub.iter().map(|r| r.ratio).collect();
    let within = mart
        .iter()
        .chain(&sub)
        .chain([&sub_small])
        .all(|r| r.ratio <= r.bound);
    let secs = start.elapsed().as_secs_f64();
    let ok = increasing(&mart)
        && increasing(&sub)
        && sub_small.ratio > *sub_ratios.last().unwrap()
        && mart_last >= C7_MART_THRESHOLD
        && sub_small.ratio >= C7_SUB_THRESHOLD
        && within
        && secs <= C7_SECONDS;
    let mart_ratios: Vec<String> = mart.iter().map(|r| format!("{:.4}", r.ratio)).collect();
    (
        ok,
        format!(
            "martingale p=2 {mart_ratios:?} (>= {C7_MART_THRESHOLD}), \
             submartingale p=2 alpha=1 delta={C7_SUB_DELTA} {:.4} (>= {C7_SUB_THRESHOLD}), {secs:.2} s",
            sub_small.ratio
        ),
    )
}

fn c8() -> Outcome {
    let spec = RandomTreeSpec {
        max_depth: 4,
        ..RandomTreeSpec::default()
    };
    let mut hits = 0usize;
    let mut repeat_ok = true;
    for run in 0..C8_RUNS {
        let mut rng = ChaCha8Rng::seed_from_u64(800 + run);
        let tree = if run % 2 == 0 {
            random_martingale_tree(&mut rng, &spec).unwrap()
        } else {
            random_submartingale_tree(&mut rng, &spec, 0.5).unwrap()
        };
        let p = 2.0 + (run % 3) as f64;
        let exact = exact_moments(&tree, p).unwrap();
        let sampler = TreeSampler::new(tree);
        let e = mc_estimate(&sampler, p, C8_PATHS, run).unwrap();
        if (e.summary.ratio - exact.ratio).abs() <= C8_SIGMAS * e.se_ratio {
            hits += 1;
        }
        if run < 5 {
            repeat_ok &= mc_estimate(&sampler, p, C8_PATHS, run).unwrap() == e;
        }
    }
    let ok = hits >= C8_MIN_HITS && repeat_ok;
    (
        ok,
        format!(
            "{hits}/{C8_RUNS} ratio estimates within {C8_SIGMAS} SE of the exact ratio \
             (need {C8_MIN_HITS}), repeat runs identical: {repeat_ok}"
        ),
    )
}

fn c9() -> Outcome {
    let start = Instant::now();
    let run = |steps: usize| {
        let scheme = ItoScheme::with_steps(
            ReflectedWalk { s0: 0.0 },
            Integrand::Alternating,
            Integrand::Alternating,
            1.0,
            steps,
            1.0,
        )
        .unwrap();
        mc_estimate(&scheme, 2.0, C9_PATHS, 9).unwrap()
    };
    let a = run(C9_STEPS);
    let b = run(2 * C9_STEPS);
    let upper = a.summary.ratio + C9_SIGMAS * a.se_ratio;
    let change = (b.summary.ratio - a.summary.ratio).abs() / a.summary.ratio;
    let secs = start.elapsed().as_secs_f64();
    let ok = upper <= 4.0 && change <= C9_HALVING_REL && secs <= C9_SECONDS;
    (
        ok,
        format!(
            "ratio {:.4} + {C9_SIGMAS} SE = {upper:.4} (<= 4), halving change {:.2}%, {secs:.2} s",
            a.summary.ratio,
            100.0 * change
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 9] = [
        ("figure 1 reproduction", c1),
        ("ODE fidelity", c2),
        ("inverse consistency", c3),
        ("special-function certification", c4),
        ("supermartingale property", c5),
        ("bounds on exact trees", c6),
        ("sharpness witnesses", c7),
        ("Monte Carlo calibration", c8),
        ("stochastic integral", c9),
    ];
    let mut all = true;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (ok, detail) = f();
        all &= ok;
        println!(
            "criterion {} {name}: {} ({detail})",
            i + 1,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

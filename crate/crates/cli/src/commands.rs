use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde_json::json;

use sharpmax::gamma::{default_x_max, DEFAULT_RESID_TOL};
use sharpmax::sharpness::{ratio_sweep, rounds_for, rows_to_csv, summarize};
use sharpmax::tree_sim::{
    exact_moments, mc_estimate, FiniteAdaptedTree, Integrand, ItoScheme, McEstimate, Mode,
    PathGenerator, RandomWalkTransform, ReflectedWalk, TreeSampler,
};
use sharpmax::verify::{run_suite, CheckReport, GridSpec, SuiteOptions};
use sharpmax::{gamma_linear, solve_gamma, GammaSolution, Params};

use crate::config::ConfigFile;
use crate::{
    Cli, Command, Figure1Args, GammaArgs, IntegrandKind, ItoArgs, Outcome, SharpnessArgs,
    SimulateArgs, SolveArgs, SweepMode, VerifyArgs,
};

/// Perturbation applied by the hidden `--corrupt-gamma` flag.
const CORRUPTION: (f64, f64, f64) = (1.0, 0.25, 1e-3);

struct Sink {
    out: Option<PathBuf>,
}

impl Sink {
    fn data(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => {
                std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
            }
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(text.as_bytes())?;
                Ok(stdout.flush()?)
            }
        }
    }

    fn summary(&self, value: &serde_json::Value) -> Result<()> {
        let line = serde_json::to_string(value)?;
        if self.out.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
        Ok(())
    }
}

struct Ctx<'a> {
    cli: &'a Cli,
    cfg: &'a ConfigFile,
    sink: Sink,
}

impl Ctx<'_> {
    fn single(&self, flag: Option<&String>, key: &str, default: f64) -> Result<f64> {
        let list = self
            .cfg
            .pick_list(flag.map(String::as_str), key, &default.to_string())?;
        match list.as_slice() {
            [v] => Ok(*v),
            _ => bail!("--{key} takes a single value here"),
        }
    }

    fn p(&self, default: f64) -> Result<f64> {
        self.single(self.cli.p.as_ref(), "p", default)
    }

    fn alpha(&self, default: f64) -> Result<f64> {
        self.single(self.cli.alpha.as_ref(), "alpha", default)
    }

    fn seed(&self) -> Result<u64> {
        self.cfg.pick(self.cli.seed, "seed", 0)
    }

    fn solve(&self, params: Params, args: &SolveArgs) -> Result<GammaSolution> {
        let x_max = self.cfg.pick(args.x_max, "x-max", default_x_max(&params))?;
        let tol = self.cfg.pick(args.tol_ode, "tol-ode", DEFAULT_RESID_TOL)?;
        solve_gamma(params, x_max, tol).with_context(|| {
            format!(
                "solving for gamma at p = {}, alpha = {}",
                params.p(),
                params.alpha()
            )
        })
    }
}

pub fn run(cli: &Cli, cfg: &ConfigFile) -> Result<Outcome> {
    let workers = cfg.pick_opt(cli.workers, "workers")?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .context("starting the worker pool")?;
    let out = match &cli.out {
        Some(p) => Some(p.clone()),
        None => cfg.raw("out").map(PathBuf::from),
    };
    let ctx = Ctx {
        cli,
        cfg,
        sink: Sink { out },
    };
    pool.install(|| match &cli.command {
        Command::Gamma(a) => gamma(&ctx, a),
        Command::Figure1(a) => figure1(&ctx, a),
        Command::Verify(a) => verify(&ctx, a),
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Ito(a) => ito(&ctx, a),
        Command::Sharpness(a) => sharpness(&ctx, a),
    })
}

fn table_csv(rows: &[[f64; 3]]) -> String {
    let mut s = String::from("x,gamma,gamma_prime\n");
    for r in rows {
        s.push_str(&format!("{},{},{}\n", r[0], r[1], r[2]));
    }
    s
}

fn gamma(ctx: &Ctx, a: &GammaArgs) -> Result<Outcome> {
    let params = Params::new(ctx.p(2.0)?, ctx.alpha(1.0)?)?;
    let sol = ctx.solve(params, &a.solve)?;
    match ctx.cfg.pick_opt(a.step, "step")? {
        Some(step) => {
            let from = ctx.cfg.pick(a.from, "from", 0.0)?;
            let to = ctx.cfg.pick(a.to, "to", sol.x_max())?;
            ctx.sink.data(&table_csv(&sol.table(from, to, step)?))?;
        }
        None => ctx.sink.data(&(sol.to_json()? + "\n"))?,
    }
    ctx.sink.summary(&json!({
        "command": "gamma",
        "params": params,
        "x0": params.x0(),
        "x_max": sol.x_max(),
        "knots": sol.knots().len(),
        "resid_tol": sol.tolerances().resid_tol,
    }))?;
    Ok(Outcome::Pass)
}

fn figure1(ctx: &Ctx, a: &Figure1Args) -> Result<Outcome> {
    let params = Params::new(ctx.p(3.0)?, ctx.alpha(1.0)?)?;
    let sol = ctx.solve(params, &a.solve)?;
    let from = ctx.cfg.pick(a.from, "from", 0.0)?;
    let to = ctx.cfg.pick(a.to, "to", 10.0)?;
    let step = ctx.cfg.pick(a.step, "step", 0.01)?;
    let rows = sol.table(from, to, step)?;
    ctx.sink.data(&table_csv(&rows))?;

    let x0 = params.x0();
    let linear_dev = rows
        .iter()
        .filter(|r| r[0] <= x0)
        .map(|r| (r[1] - gamma_linear(r[0], &params)).abs())
        .fold(0.0, f64::max);
    let curved: Vec<&[f64; 3]> = rows.iter().filter(|r| r[0] >= x0).collect();
    let max_second = curved
        .windows(3)
        .map(|w| w[0][1] - 2.0 * w[1][1] + w[2][1])
        .fold(f64::NEG_INFINITY, f64::max);
    let min_step = curved
        .windows(2)
        .map(|w| w[1][1] - w[0][1])
        .fold(f64::INFINITY, f64::min);
    let max_gamma = rows.iter().map(|r| r[1]).fold(f64::NEG_INFINITY, f64::max);
    let pass = linear_dev <= 1e-10 && max_second <= 1e-8 && min_step >= -1e-8 && max_gamma < 1.0;
    ctx.sink.summary(&json!({
        "command": "figure1",
        "params": params,
        "rows": rows.len(),
        "linear_max_deviation": linear_dev,
        "max_second_difference": max_second,
        "min_increment": min_step,
        "max_gamma": max_gamma,
        "pass": pass,
    }))?;
    Ok(if pass { Outcome::Pass } else { Outcome::Fail })
}

fn verify(ctx: &Ctx, a: &VerifyArgs) -> Result<Outcome> {
    let ps = ctx.cfg.pick_list(ctx.cli.p.as_deref(), "p", "2,2.5,3,4")?;
    let alphas = ctx
        .cfg
        .pick_list(ctx.cli.alpha.as_deref(), "alpha", "0.25,0.5,1")?;
    let grid = ctx.cfg.pick(a.grid, "grid", 100_000usize)?;
    let samples = ctx.cfg.pick(a.samples, "samples", 10_000usize)?;
    let tol_check = ctx.cfg.pick_opt(a.tol_check, "tol-check")?;
    let corrupt = a.corrupt_gamma
        || ctx
            .cfg
            .raw("corrupt-gamma")
            .is_some_and(|v| v == "true" || v == "1");
    let opts = SuiteOptions {
        grid: GridSpec::with_points(grid),
        line_samples: samples,
        tangent_samples: samples,
        gradient_samples: samples,
        seed: ctx.seed()?,
        tol_override: tol_check,
        ..SuiteOptions::default()
    };
    let mut lines = String::new();
    let mut reports: Vec<CheckReport> = Vec::new();
    for &p in &ps {
        for &alpha in &alphas {
            let params = Params::new(p, alpha)?;
            let mut sol = ctx.solve(params, &a.solve)?;
            if corrupt {
                let (c, w, amp) = CORRUPTION;
                sol.perturb_log_deficit(c, w, amp);
            }
            for r in run_suite(&sol, &opts)? {
                lines.push_str(&r.to_json_line());
                lines.push('\n');
                reports.push(r);
            }
        }
    }
    ctx.sink.data(&lines)?;
    let failed: Vec<&CheckReport> = reports.iter().filter(|r| !r.passed()).collect();
    for r in &failed {
        eprintln!("{}", r.to_json_line());
    }
    ctx.sink.summary(&json!({
        "command": "verify",
        "p": ps,
        "alpha": alphas,
        "checks": reports.len(),
        "failed": failed.iter().map(|r| &r.check_name).collect::<Vec<_>>(),
        "all_pass": failed.is_empty(),
    }))?;
    Ok(if failed.is_empty() {
        Outcome::Pass
    } else {
        Outcome::Fail
    })
}

fn estimate_csv(e: &McEstimate) -> String {
    let n = e.n_paths;
    let s = &e.summary;
    let mut out = String::from("quantity,n_paths,estimate,stderr\n");
    for (name, v, se) in [
        ("e_gstar_p", s.e_gstar_p, e.se_gstar_p),
        ("e_f_p", s.e_f_p, e.se_f_p),
        ("e_fstar_p", s.e_fstar_p, e.se_fstar_p),
        ("ratio", s.ratio, e.se_ratio),
        ("ratio_fstar", s.ratio_fstar, e.se_ratio_fstar),
    ] {
        out.push_str(&format!("{name},{n},{v},{se}\n"));
    }
    out
}

fn simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<Outcome> {
    let p = ctx.p(2.0)?;
    let alpha = ctx.alpha(1.0)?;
    let paths = ctx.cfg.pick(a.paths, "paths", 100_000usize)?;
    let steps = ctx.cfg.pick(a.steps, "steps", 50usize)?;
    let seed = ctx.seed()?;
    if !p.is_finite() || p < 1.0 || !(0.0..=1.0).contains(&alpha) {
        bail!("need p >= 1 and alpha in [0, 1], got p = {p}, alpha = {alpha}");
    }
    let tree_path = match &a.tree {
        Some(t) => Some(t.clone()),
        None => ctx.cfg.raw("tree").map(PathBuf::from),
    };
    let (generator, exact): (Box<dyn PathGenerator>, _) = match tree_path {
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading tree {}", path.display()))?;
            let tree = FiniteAdaptedTree::from_json(&text)?;
            let exact = exact_moments(&tree, p)?;
            (Box::new(TreeSampler::new(tree)), Some(exact))
        }
        None if alpha == 0.0 => (
            Box::new(RandomWalkTransform::new(steps, 0.0, Integrand::RandomSign)?),
            None,
        ),
        None => {
            let walk = ReflectedWalk { s0: 0.0 };
            let scheme = ItoScheme::with_steps(
                walk,
                Integrand::RandomSign,
                Integrand::RandomSign,
                alpha,
                steps,
                steps as f64,
            )?;
            (Box::new(scheme), None)
        }
    };
    let e = mc_estimate(generator.as_ref(), p, paths, seed)?;
    ctx.sink.data(&estimate_csv(&e))?;
    let mode = generator.mode();
    let pass = e.summary.ratio <= e.bound + 3.0 * e.se_ratio;
    ctx.sink.summary(&json!({
        "command": "simulate",
        "mode": mode,
        "p": p,
        "paths": paths,
        "steps": steps,
        "seed": seed,
        "bound": e.bound,
        "ratio": e.summary.ratio,
        "se_ratio": e.se_ratio,
        "ratio_fstar": e.summary.ratio_fstar,
        "exact": exact,
        "pass": pass,
    }))?;
    Ok(if pass { Outcome::Pass } else { Outcome::Fail })
}

fn ito(ctx: &Ctx, a: &ItoArgs) -> Result<Outcome> {
    let p = ctx.p(2.0)?;
    let alpha = ctx.alpha(1.0)?;
    let paths = ctx.cfg.pick(a.paths, "paths", 100_000usize)?;
    let steps = ctx.cfg.pick(a.steps, "steps", 1_000usize)?;
    let t_end = ctx.cfg.pick(a.t_end, "t-end", 1.0)?;
    let seed = ctx.seed()?;
    let kind = match a.integrand {
        Some(k) => k,
        None => match ctx.cfg.raw("integrand") {
            None | Some("alternating") => IntegrandKind::Alternating,
            Some("constant") => IntegrandKind::Constant,
            Some("random") => IntegrandKind::Random,
            Some(other) => bail!("unknown integrand {other:?}"),
        },
    };
    let h = match kind {
        IntegrandKind::Alternating => Integrand::Alternating,
        IntegrandKind::Constant => Integrand::Constant { value: 1.0 },
        IntegrandKind::Random => Integrand::RandomSign,
    };
    let mut runs = vec![steps];
    if a.halve {
        runs.push(2 * steps);
    }
    let mut csv = String::from("steps,dt,n_paths,e_gstar_p,e_f_p,ratio,se_ratio,ratio_fstar\n");
    let mut results = Vec::new();
    for &n in &runs {
        let scheme = ItoScheme::with_steps(
            ReflectedWalk { s0: 0.0 },
            h.clone(),
            h.clone(),
            alpha,
            n,
            t_end,
        )?;
        let e = mc_estimate(&scheme, p, paths, seed)?;
        csv.push_str(&format!(
            "{n},{},{},{},{},{},{},{}\n",
            scheme.dt,
            e.n_paths,
            e.summary.e_gstar_p,
            e.summary.e_f_p,
            e.summary.ratio,
            e.se_ratio,
            e.summary.ratio_fstar
        ));
        results.push(e);
    }
    ctx.sink.data(&csv)?;
    let bound = (alpha + 1.0) * p;
    let within = results
        .iter()
        .all(|e| e.summary.ratio + 3.0 * e.se_ratio <= bound);
    let change = match results.as_slice() {
        [a, b] => Some((b.summary.ratio - a.summary.ratio).abs() / a.summary.ratio),
        _ => None,
    };
    let stable = change.is_none_or(|c| c <= 0.02);
    ctx.sink.summary(&json!({
        "command": "ito",
        "p": p,
        "alpha": alpha,
        "steps": runs,
        "paths": paths,
        "seed": seed,
        "bound": bound,
        "ratio": results[0].summary.ratio,
        "se_ratio": results[0].se_ratio,
        "halving_change": change,
        "pass": within && stable,
    }))?;
    Ok(if within && stable {
        Outcome::Pass
    } else {
        Outcome::Fail
    })
}

fn sharpness(ctx: &Ctx, a: &SharpnessArgs) -> Result<Outcome> {
    let p = ctx.p(2.0)?;
    let mode_kind = match a.mode {
        Some(m) => m,
        None => match ctx.cfg.raw("mode") {
            Some("martingale") => SweepMode::Martingale,
            Some("submartingale") => SweepMode::Submartingale,
            Some(other) => bail!("unknown mode {other:?}"),
            None if ctx.cli.alpha.is_some() || ctx.cfg.raw("alpha").is_some() => {
                SweepMode::Submartingale
            }
            None => SweepMode::Martingale,
        },
    };
    let mode = match mode_kind {
        SweepMode::Martingale => Mode::Martingale,
        SweepMode::Submartingale => Mode::Submartingale {
            alpha: ctx.alpha(1.0)?,
        },
    };
    let deltas = ctx
        .cfg
        .pick_list(a.delta.as_deref(), "delta", "0.1,0.05,0.025,0.0125")?;
    let horizon = ctx.cfg.pick(a.horizon, "horizon", 20.0)?;
    let rounds: Vec<usize> = match a.rounds.as_deref().or(ctx.cfg.raw("rounds")) {
        None => deltas.iter().map(|&d| rounds_for(d, horizon)).collect(),
        Some(text) => {
            let r: Vec<usize> = text
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .with_context(|| format!("bad rounds {s:?}"))
                })
                .collect::<Result<_>>()?;
            match r.len() {
                1 => vec![r[0]; deltas.len()],
                n if n == deltas.len() => r,
                n => bail!("{n} round counts for {} deltas", deltas.len()),
            }
        }
    };
    let cases: Vec<(f64, usize)> = deltas.iter().copied().zip(rounds).collect();
    let rows = ratio_sweep(mode, p, &cases)?;
    ctx.sink.data(&rows_to_csv(&rows))?;
    let summary = summarize(mode, p, &rows);
    let mut value = serde_json::to_value(&summary)?;
    value["command"] = json!("sharpness");
    value["pass"] = json!(summary.within_bound);
    ctx.sink.summary(&value)?;
    Ok(if summary.within_bound {
        Outcome::Pass
    } else {
        Outcome::Fail
    })
}

//! Grid and random-sample certification of the properties of γ and `U`.
//!
//! Every check returns a [`CheckReport`] holding the worst slack found, where
//! it was found, and the verdict. Evaluation is parallel over points; the
//! worst point is then picked by a sequential scan in point order, so a
//! report does not depend on the number of worker threads.
//!
//! Checks whose quantities grow with the arguments (`U` is homogeneous of
//! degree `p`) report slacks divided by a local scale, stated per check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gamma::{GammaSolution, Params};
use crate::special::{
    big_u_eval, big_u_grad, majorization_slack, partials_in_region, Point3, Region,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// How the worst slack is judged: `AtLeast` passes iff `worst >= -tol`,
/// `AtMost` passes iff `worst <= tol`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlackKind {
    AtLeast,
    AtMost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_name: String,
    pub params: Params,
    pub grid_size: usize,
    pub worst_slack: f64,
    pub worst_location: String,
    pub tolerance: f64,
    pub kind: SlackKind,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<CheckReport>,
}

impl CheckReport {
    pub fn new(
        check_name: &str,
        params: Params,
        grid_size: usize,
        worst: (f64, String),
        tolerance: f64,
        kind: SlackKind,
    ) -> Self {
        let (worst_slack, worst_location) = worst;
        let ok = match kind {
            SlackKind::AtLeast => worst_slack >= -tolerance,
            SlackKind::AtMost => worst_slack <= tolerance,
        };
        Self {
            check_name: check_name.to_string(),
            params,
            grid_size,
            worst_slack,
            worst_location,
            tolerance,
            kind,
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            components: Vec::new(),
        }
    }

    /// Combine sub-checks; the headline numbers are those of the component
    /// that is closest to (or furthest past) its tolerance.
    pub fn bundle(check_name: &str, params: Params, components: Vec<CheckReport>) -> Self {
        let badness = |c: &CheckReport| {
            let excess = match c.kind {
                SlackKind::AtLeast => -c.worst_slack - c.tolerance,
                SlackKind::AtMost => c.worst_slack - c.tolerance,
            };
            excess / c.tolerance.abs().max(f64::MIN_POSITIVE)
        };
        let worst = components
            .iter()
            .max_by(|a, b| badness(a).total_cmp(&badness(b)))
            .expect("bundle needs at least one component");
        Self {
            check_name: check_name.to_string(),
            params,
            grid_size: components.iter().map(|c| c.grid_size).sum(),
            worst_slack: worst.worst_slack,
            worst_location: format!("{}: {}", worst.check_name, worst.worst_location),
            tolerance: worst.tolerance,
            kind: worst.kind,
            verdict: if components.iter().all(CheckReport::passed) {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            components,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("reports always serialize")
    }
}

/// Index and value of the worst entry: the minimum for `AtLeast`, the
/// maximum for `AtMost`. NaN counts as worst; ties go to the lower index.
pub fn worst_of(values: &[f64], kind: SlackKind) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        let replace = match best {
            None => true,
            Some((_, b)) if b.is_nan() => false,
            Some(_) if v.is_nan() => true,
            Some((_, b)) => match kind {
                SlackKind::AtLeast => v < b,
                SlackKind::AtMost => v > b,
            },
        };
        if replace {
            best = Some((i, v));
        }
    }
    best
}

/// Normalized-grid layout for the point checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Points in `x`, half uniform on `[0, x_extent]`, half log-spaced on `[1e-6, 1]`.
    pub nx: usize,
    /// Uniform points in `y` on `[-1, 1]`.
    pub ny: usize,
    /// Points in `z` (log-spaced) for the unnormalized grids.
    pub nz: usize,
    pub x_extent: f64,
    pub z_min: f64,
    /// Distance from the region boundaries of the extra seam-hugging points.
    pub boundary_offset: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nx: 400,
            ny: 250,
            nz: 16,
            x_extent: 4.0,
            z_min: 1e-3,
            boundary_offset: 1e-4,
        }
    }
}

impl GridSpec {
    /// A grid with about `n` strip points.
    pub fn with_points(n: usize) -> Self {
        let nx = ((n as f64 * 1.6).sqrt().round() as usize).max(4);
        let ny = (n / nx).max(3);
        Self {
            nx,
            ny,
            ..Self::default()
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 { (b - a) / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |i| {
        if i + 1 == n && n > 1 {
            b
        } else {
            a + i as f64 * step
        }
    })
}

fn logspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    linspace(a.ln(), b.ln(), n).map(f64::exp)
}

/// `x` values of the grid, sorted, with the junction and the tangency point
/// `1/((p-1)(alpha+1))` of the majorization added.
pub fn grid_xs(grid: &GridSpec, params: &Params) -> Vec<f64> {
    let mut xs: Vec<f64> = linspace(0.0, grid.x_extent, grid.nx - grid.nx / 2)
        .chain(logspace(1e-6, 1.0, grid.nx / 2))
        .collect();
    xs.push(params.x0());
    xs.push(1.0 / ((params.p() - 1.0) * (params.alpha() + 1.0)));
    xs.retain(|&x| x <= grid.x_extent);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// Points `(x, y)` of the strip: the product grid plus points at distance
/// `boundary_offset` on either side of `|y| = γ(x)` and `x + |y| = 1`.
pub fn strip_points(grid: &GridSpec, sol: &GammaSolution) -> Result<Vec<(f64, f64)>> {
    let xs = grid_xs(grid, sol.params());
    let ys: Vec<f64> = linspace(-1.0, 1.0, grid.ny).collect();
    let mut pts = Vec::with_capacity(xs.len() * (ys.len() + 8));
    for &x in &xs {
        for &y in &ys {
            pts.push((x, y));
        }
    }
    let off = grid.boundary_offset;
    for &x in &xs {
        if x > sol.x_max() {
            continue;
        }
        let g = sol.gamma(x)?;
        let mut extra = vec![g - off, g + off];
        if x < 1.0 {
            extra.push(1.0 - x - off);
            extra.push(1.0 - x + off);
        }
        for y in extra {
            if (0.0..=1.0).contains(&y) {
                pts.push((x, y));
                pts.push((x, -y));
            }
        }
    }
    Ok(pts)
}

fn fmt_xy(x: f64, y: f64) -> String {
    format!("x={x:e} y={y:e}")
}

fn fmt_pt(pt: &Point3) -> String {
    format!("x={:e} y={:e} z={:e}", pt.x, pt.y, pt.z)
}

fn scan<T>(
    items: &[T],
    kind: SlackKind,
    values: Vec<f64>,
    describe: impl Fn(&T) -> String,
) -> (f64, String) {
    match worst_of(&values, kind) {
        Some((i, v)) => (v, describe(&items[i])),
        None => (0.0, "empty grid".into()),
    }
}

/// Stream `i` of the generator seeded with `seed`: one independent,
/// reproducible source per sample.
pub fn sample_rng(seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng
}

/// Majorization: `U(x,y,z) - ((|y| v z)^p - K x^p) >= 0`. By homogeneity the
/// slack at any point is `(|y| v z)^p` times the slack at the normalized
/// point, so the check runs on strip points; for `|y| > z` the normalized
/// point is `(x/|y|, ±1)`, which the strip grid contains.
pub fn check_majorization(sol: &GammaSolution, grid: &GridSpec, tol: f64) -> Result<CheckReport> {
    let pts = strip_points(grid, sol)?;
    let slacks = pts
        .par_iter()
        .map(|&(x, y)| majorization_slack(x, y, sol))
        .collect::<Result<Vec<_>>>()?;
    let worst = scan(&pts, SlackKind::AtLeast, slacks, |&(x, y)| fmt_xy(x, y));
    Ok(CheckReport::new(
        "majorization",
        *sol.params(),
        pts.len(),
        worst,
        tol,
        SlackKind::AtLeast,
    ))
}

/// Derivative inequality `U_x + alpha |U_y| <= 0` for `|y| <= z`, on strip
/// points (`z = 1`), divided by `max(1, |U_x|, |U_y|)`. At `x = 0` the
/// inequality is an equality on D1, hence the relative scale.
pub fn check_derivative_inequality(
    sol: &GammaSolution,
    grid: &GridSpec,
    tol: f64,
) -> Result<CheckReport> {
    let pts = strip_points(grid, sol)?;
    let alpha = sol.params().alpha();
    let values = pts
        .par_iter()
        .map(|&(x, y)| {
            let (_, ux, uy) = big_u_grad(&Point3 { x, y, z: 1.0 }, sol)?;
            Ok((ux + alpha * uy.abs()) / 1f64.max(ux.abs()).max(uy.abs()))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = scan(&pts, SlackKind::AtMost, values, |&(x, y)| fmt_xy(x, y));
    Ok(CheckReport::new(
        "derivative_inequality",
        *sol.params(),
        pts.len(),
        worst,
        tol,
        SlackKind::AtMost,
    ))
}

/// A random line `t -> (t, y + a t, z)` with `|y| <= z`, `a` in `[-1, 1]`.
#[derive(Debug, Clone, Copy)]
struct Line {
    y: f64,
    z: f64,
    a: f64,
}

fn random_line(rng: &mut ChaCha8Rng) -> Line {
    let z = (rng.random_range(-1.0..1.0) * 4f64.ln()).exp();
    let y = rng.random_range(-1.0..=1.0) * z;
    let a = rng.random_range(-1.0..=1.0);
    Line { y, z, a }
}

/// Concavity of `Φ(t) = U(t, y + a t, z)` on `[0, 4z]`: centered second
/// differences on `t_points` interior points, divided by
/// `δ² max(1, |Φ(t)|)`.
pub fn check_line_concavity(
    sol: &GammaSolution,
    samples: usize,
    t_points: usize,
    seed: u64,
    tol: f64,
) -> Result<CheckReport> {
    let t_points = t_points.max(2);
    let per_line = (0..samples)
        .into_par_iter()
        .map(|i| {
            let line = random_line(&mut sample_rng(seed, i as u64));
            let delta = 4.0 * line.z / (t_points + 1) as f64;
            let phi = (0..t_points + 2)
                .map(|j| {
                    let t = j as f64 * delta;
                    big_u_eval(
                        &Point3 {
                            x: t,
                            y: line.y + line.a * t,
                            z: line.z,
                        },
                        sol,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let mut worst = (f64::NEG_INFINITY, 0.0);
            for j in 1..=t_points {
                let d2 = (phi[j - 1] - 2.0 * phi[j] + phi[j + 1]) / (delta * delta);
                let v = d2 / 1f64.max(phi[j].abs());
                if v > worst.0 || v.is_nan() {
                    worst = (v, j as f64 * delta);
                }
            }
            Ok((worst.0, line, worst.1))
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = per_line.iter().map(|r| r.0).collect();
    let worst = scan(&per_line, SlackKind::AtMost, values, |(_, l, t)| {
        format!("y={:e} z={:e} a={:e} t={t:e}", l.y, l.z, l.a)
    });
    Ok(CheckReport::new(
        "line_concavity",
        *sol.params(),
        samples * t_points,
        worst,
        tol,
        SlackKind::AtMost,
    ))
}

/// The tangent-plane bound
/// `U(x+k_x, y+k_y, z) <= U + U_x k_x + U_y k_y` for `|y| <= z`,
/// `|k_y| <= |k_x|`, `x + k_x >= 0`; violations divided by
/// `max(1, |U|, |U(x+k)|, |U_x k_x|, |U_y k_y|)`.
pub fn check_tangent_majorant(
    sol: &GammaSolution,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<CheckReport> {
    let draws = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed ^ 0x7a9e_11c3, i as u64);
            let z = (rng.random_range(-1.0..1.0) * 4f64.ln()).exp();
            // keep off the kink |y| = z where the gradient is one-sided
            let y = rng.random_range(-1.0..1.0) * z * (1.0 - 1e-6);
            let x = if rng.random_bool(0.1) {
                0.0
            } else {
                rng.random_range(0.0..3.0) * z
            };
            let kx = rng.random_range(-x..3.0 * z);
            let ky = rng.random_range(-1.0..=1.0) * kx.abs();
            let base = Point3 { x, y, z };
            let (u, ux, uy) = big_u_grad(&base, sol)?;
            let moved = big_u_eval(
                &Point3 {
                    x: (x + kx).max(0.0),
                    y: y + ky,
                    z,
                },
                sol,
            )?;
            let tangent = u + ux * kx + uy * ky;
            let scale = 1f64
                .max(u.abs())
                .max(moved.abs())
                .max((ux * kx).abs())
                .max((uy * ky).abs());
            Ok(((moved - tangent) / scale, base, kx, ky))
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let worst = scan(&draws, SlackKind::AtMost, values, |(_, b, kx, ky)| {
        format!("{} kx={kx:e} ky={ky:e}", fmt_pt(b))
    });
    Ok(CheckReport::new(
        "tangent_majorant",
        *sol.params(),
        samples,
        worst,
        tol,
        SlackKind::AtMost,
    ))
}

/// `x` values for the boundary check: `n` points uniform on `[lo, hi]`.
pub fn start_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo, hi, n).collect()
}

/// `U(x, 1, 1) <= 0` for `x >= 1`.
pub fn check_start_condition(sol: &GammaSolution, xs: &[f64], tol: f64) -> Result<CheckReport> {
    if let Some(&bad) = xs.iter().find(|&&x| !(x >= 1.0)) {
        return Err(crate::error::Error::Domain(format!(
            "start grid contains x = {bad} < 1"
        )));
    }
    let values = xs
        .par_iter()
        .map(|&x| big_u_eval(&Point3 { x, y: 1.0, z: 1.0 }, sol))
        .collect::<Result<Vec<_>>>()?;
    let worst = scan(xs, SlackKind::AtMost, values, |&x| format!("x={x:e}"));
    Ok(CheckReport::new(
        "start_condition",
        *sol.params(),
        xs.len(),
        worst,
        tol,
        SlackKind::AtMost,
    ))
}

fn random_xs(sol: &GammaSolution, n: usize, seed: u64) -> Vec<f64> {
    let x0 = sol.params().x0();
    let mut rng = sample_rng(seed, 0);
    (0..n)
        .map(|_| x0 + (sol.x_max() - x0) * (1.0 - rng.random::<f64>()))
        .collect()
}

/// Tolerances of [`check_gamma_properties`] and [`check_inverse_consistency`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaTolerances {
    pub resid: f64,
    pub wazne: f64,
    pub junction: f64,
    pub inverse: f64,
    pub h_at_one: f64,
    pub h_prime_rel: f64,
    /// Allowed excess for `γ < 1` and `s - 1 <= h(s) <= s`.
    pub bounds: f64,
}

impl Default for GammaTolerances {
    fn default() -> Self {
        Self {
            resid: 1e-9,
            wazne: 1e-9,
            junction: 1e-8,
            inverse: 1e-9,
            h_at_one: 1e-10,
            h_prime_rel: 1e-7,
            bounds: 0.0,
        }
    }
}

impl GammaTolerances {
    pub fn uniform(tol: f64) -> Self {
        Self {
            resid: tol,
            wazne: tol,
            junction: tol,
            inverse: tol,
            h_at_one: tol,
            h_prime_rel: tol,
            bounds: tol,
        }
    }
}

/// γ < 1, γ' >= 0, concavity (second differences on a uniform grid of
/// `points` points), ODE residual and the inequality
/// `(p-2)(1-γ) - xγ' <= 0` at `points` random points, and the C¹ junction.
pub fn check_gamma_properties(
    sol: &GammaSolution,
    points: usize,
    seed: u64,
    tol: &GammaTolerances,
) -> Result<CheckReport> {
    let params = *sol.params();
    let x0 = params.x0();
    let xs = random_xs(sol, points, seed);

    let max_gamma = sol
        .values()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let argmax = sol
        .values()
        .iter()
        .position(|&v| v == max_gamma)
        .unwrap_or(0);
    let below_one = CheckReport::new(
        "gamma_below_one",
        params,
        sol.knots().len(),
        (max_gamma - 1.0, format!("x={:e}", sol.knots()[argmax])),
        tol.bounds,
        SlackKind::AtMost,
    );

    let derivs = xs
        .par_iter()
        .map(|&x| sol.eval(x).map(|v| v.1))
        .collect::<Result<Vec<_>>>()?;
    let monotone = CheckReport::new(
        "gamma_monotone",
        params,
        xs.len(),
        scan(&xs, SlackKind::AtLeast, derivs, |&x| format!("x={x:e}")),
        tol.resid,
        SlackKind::AtLeast,
    );

    let grid: Vec<f64> = linspace(x0, sol.x_max(), points.max(3)).collect();
    let eps = grid
        .par_iter()
        .map(|&x| sol.deficit(x))
        .collect::<Result<Vec<_>>>()?;
    let second: Vec<f64> = (1..grid.len() - 1)
        .map(|i| -(eps[i - 1] - 2.0 * eps[i] + eps[i + 1]))
        .collect();
    let concave = CheckReport::new(
        "gamma_concave",
        params,
        second.len(),
        scan(&grid[1..grid.len() - 1], SlackKind::AtMost, second, |&x| {
            format!("x={x:e}")
        }),
        tol.resid,
        SlackKind::AtMost,
    );

    let resid = xs
        .par_iter()
        .map(|&x| sol.ode_residual(x).map(f64::abs))
        .collect::<Result<Vec<_>>>()?;
    let residual = CheckReport::new(
        "ode_residual",
        params,
        xs.len(),
        scan(&xs, SlackKind::AtMost, resid, |&x| format!("x={x:e}")),
        tol.resid,
        SlackKind::AtMost,
    );

    let wz = xs
        .par_iter()
        .map(|&x| sol.wazne_slack(x))
        .collect::<Result<Vec<_>>>()?;
    let wazne = CheckReport::new(
        "gamma_slope_inequality",
        params,
        xs.len(),
        scan(&xs, SlackKind::AtMost, wz, |&x| format!("x={x:e}")),
        tol.wazne,
        SlackKind::AtMost,
    );

    let (left, right) = sol.junction_slopes();
    let junction = CheckReport::new(
        "c1_junction",
        params,
        1,
        (
            (left - right).abs(),
            format!("x={x0:e} left={left} right={right}"),
        ),
        tol.junction,
        SlackKind::AtMost,
    );

    Ok(CheckReport::bundle(
        "gamma_properties",
        params,
        vec![below_one, monotone, concave, residual, wazne, junction],
    ))
}

/// `h ∘ H` and `H ∘ h` against the identity, `h(1) = x0`,
/// `s - 1 <= h(s) <= s`, and agreement of the two expressions for `h'`.
pub fn check_inverse_consistency(
    sol: &GammaSolution,
    points: usize,
    seed: u64,
    tol: &GammaTolerances,
) -> Result<CheckReport> {
    let params = *sol.params();
    let xs = random_xs(sol, points, seed);
    let s_max = sol.s_max();
    let mut rng = sample_rng(seed, 1);
    let ss: Vec<f64> = (0..points)
        .map(|_| 1.0 + (s_max - 1.0) * rng.random::<f64>())
        .collect();

    let hh = xs
        .par_iter()
        .map(|&x| Ok((sol.h(sol.big_h(x)?)? - x).abs()))
        .collect::<Result<Vec<_>>>()?;
    let h_of_big_h = CheckReport::new(
        "h_after_H",
        params,
        xs.len(),
        scan(&xs, SlackKind::AtMost, hh, |&x| format!("x={x:e}")),
        tol.inverse,
        SlackKind::AtMost,
    );
    let bh = ss
        .par_iter()
        .map(|&s| Ok((sol.big_h(sol.h(s)?)? - s).abs()))
        .collect::<Result<Vec<_>>>()?;
    let big_h_of_h = CheckReport::new(
        "H_after_h",
        params,
        ss.len(),
        scan(&ss, SlackKind::AtMost, bh, |&s| format!("s={s:e}")),
        tol.inverse,
        SlackKind::AtMost,
    );
    let h1 = CheckReport::new(
        "h_at_one",
        params,
        1,
        ((sol.h(1.0)? - params.x0()).abs(), "s=1".into()),
        tol.h_at_one,
        SlackKind::AtMost,
    );
    let bounds = ss
        .par_iter()
        .map(|&s| {
            let r = sol.h(s)?;
            Ok((r - s).max((s - 1.0) - r))
        })
        .collect::<Result<Vec<_>>>()?;
    let bounds = CheckReport::new(
        "h_bounds",
        params,
        ss.len(),
        scan(&ss, SlackKind::AtMost, bounds, |&s| format!("s={s:e}")),
        tol.bounds,
        SlackKind::AtMost,
    );
    let hp = ss
        .par_iter()
        .filter(|&&s| s > 1.0)
        .map(|&s| {
            let a = sol.h_prime(s)?;
            let b = sol.h_prime_product(s)?;
            Ok((a - b).abs() / a.abs().max(b.abs()))
        })
        .collect::<Result<Vec<_>>>()?;
    let hp = CheckReport::new(
        "h_prime_two_forms",
        params,
        hp.len(),
        scan(&ss, SlackKind::AtMost, hp, |&s| format!("s={s:e}")),
        tol.h_prime_rel,
        SlackKind::AtMost,
    );
    Ok(CheckReport::bundle(
        "inverse_consistency",
        params,
        vec![h_of_big_h, big_h_of_h, h1, bounds, hp],
    ))
}

/// Points on the seams between regions, each paired with the two regions
/// that meet there.
pub fn seam_points(
    sol: &GammaSolution,
    n: usize,
    x_extent: f64,
) -> Result<Vec<(f64, f64, Region, Region)>> {
    let x0 = sol.params().x0();
    let mut pts = Vec::new();
    // |y| = γ(x) on the linear piece: D0 against D1 (x + γ(x) <= 1 there)
    for x in linspace(0.0, x0, n).take(n.saturating_sub(1)) {
        pts.push((x, sol.gamma(x)?, Region::D0, Region::D1));
    }
    // |y| = γ(x) beyond the junction: D0 against D2
    for x in linspace(x0, x_extent.min(sol.x_max()), n).skip(1) {
        pts.push((x, sol.gamma(x)?, Region::D0, Region::D2));
    }
    // x + |y| = 1 above γ: D1 against D2
    for x in linspace(0.0, x0, n).take(n.saturating_sub(1)) {
        pts.push((x, 1.0 - x, Region::D1, Region::D2));
    }
    Ok(pts)
}

/// Values and gradients of the two adjacent region formulas at seam points,
/// compared relative to `max(1, |value|, |gradient|)`.
pub fn check_c1_seams(
    sol: &GammaSolution,
    n: usize,
    x_extent: f64,
    tol: f64,
) -> Result<CheckReport> {
    let pts = seam_points(sol, n, x_extent)?;
    let values = pts
        .par_iter()
        .map(|&(x, y, a, b)| {
            let (ua, uxa, uya) = partials_in_region(a, x, y, sol)?;
            let (ub, uxb, uyb) = partials_in_region(b, x, y, sol)?;
            let scale = [1.0, ua.abs(), uxa.abs(), uya.abs()]
                .into_iter()
                .fold(0.0, f64::max);
            let diff = (ua - ub)
                .abs()
                .max((uxa - uxb).abs())
                .max((uya - uyb).abs());
            Ok(diff / scale)
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = scan(&pts, SlackKind::AtMost, values, |&(x, y, a, b)| {
        format!("{} {a:?}/{b:?}", fmt_xy(x, y))
    });
    Ok(CheckReport::new(
        "c1_seams",
        *sol.params(),
        pts.len(),
        worst,
        tol,
        SlackKind::AtMost,
    ))
}

/// Analytic gradient against Richardson-extrapolated central differences of
/// `U` at random points, away from the kinks `|y| = z`, `y = 0`, from
/// `x = 0`, and from the region seams; errors relative to
/// `max(1, |U_x|, |U_y|)`.
pub fn check_gradient_consistency(
    sol: &GammaSolution,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<CheckReport> {
    const TUBE: f64 = 1e-3;
    let params = *sol.params();
    let pts: Vec<Point3> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed ^ 0x51ed_270b, i);
            loop {
                let z = 1.0;
                let y = rng.random_range(-1.5..1.5);
                let x = rng.random_range(TUBE..4.0);
                let pt = Point3 { x, y, z };
                if (y.abs() - z).abs() < TUBE || y.abs() < TUBE {
                    continue;
                }
                let (nx, ny) = pt.normalized();
                let g = match sol.gamma(nx) {
                    Ok(g) => g,
                    Err(_) => continue,
                };
                let ny = ny.abs();
                if (ny - g).abs() < TUBE || (nx + ny - 1.0).abs() < TUBE {
                    continue;
                }
                // the D1 formula has w^(p-3) in its third derivative
                if (params.p() * (nx + ny) - 1.0).abs() < 0.05 {
                    continue;
                }
                return pt;
            }
        })
        .collect();
    let errs = pts
        .par_iter()
        .map(|pt| {
            let (_, ux, uy) = big_u_grad(pt, sol)?;
            let f = |dx: f64, dy: f64| {
                big_u_eval(
                    &Point3 {
                        x: pt.x + dx,
                        y: pt.y + dy,
                        z: pt.z,
                    },
                    sol,
                )
            };
            let central = |h: f64, dir: (f64, f64)| -> Result<f64> {
                Ok((f(h * dir.0, h * dir.1)? - f(-h * dir.0, -h * dir.1)?) / (2.0 * h))
            };
            let h = 2e-4;
            let rich = |dir| -> Result<f64> {
                Ok((4.0 * central(h / 2.0, dir)? - central(h, dir)?) / 3.0)
            };
            let fx = rich((1.0, 0.0))?;
            let fy = rich((0.0, 1.0))?;
            let scale = 1f64.max(ux.abs()).max(uy.abs());
            Ok((ux - fx).abs().max((uy - fy).abs()) / scale)
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = scan(&pts, SlackKind::AtMost, errs, fmt_pt);
    Ok(CheckReport::new(
        "gradient_consistency",
        params,
        pts.len(),
        worst,
        tol,
        SlackKind::AtMost,
    ))
}

/// `U(t pt) = t^p U(pt)` and `U(x, -y, z) = U(x, y, z)` at random points.
pub fn check_homogeneity(
    sol: &GammaSolution,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<CheckReport> {
    let p = sol.params().p();
    let draws = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed ^ 0x0bad_cafe, i);
            let z = (rng.random_range(-1.0..1.0) * 4f64.ln()).exp();
            let pt = Point3 {
                x: rng.random_range(0.0..3.0) * z,
                y: rng.random_range(-2.0..2.0) * z,
                z,
            };
            let t = (rng.random_range(-1.0..1.0) * 10f64.ln()).exp();
            let u = big_u_eval(&pt, sol)?;
            let ut = big_u_eval(
                &Point3 {
                    x: t * pt.x,
                    y: t * pt.y,
                    z: t * pt.z,
                },
                sol,
            )?;
            let mirrored = big_u_eval(&Point3 { y: -pt.y, ..pt }, sol)?;
            let tp = t.powf(p);
            let hom = (ut - tp * u).abs() / ((1.0 + u.abs()) * tp);
            // symmetry must be exact
            let sym = if mirrored == u { 0.0 } else { f64::INFINITY };
            Ok((hom.max(sym), pt, t))
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let worst = scan(&draws, SlackKind::AtMost, values, |(_, pt, t)| {
        format!("{} t={t:e}", fmt_pt(pt))
    });
    Ok(CheckReport::new(
        "homogeneity_symmetry",
        *sol.params(),
        samples,
        worst,
        tol,
        SlackKind::AtMost,
    ))
}

/// Smallest `K` with `U <= K (x+|y|+z)^p` and
/// `|U_x|, |U_y| <= K (x+|y|+z)^(p-1)` over the grid
/// `x in [0, E]`, `y in [-E, E]`, `z in [z_min, E]` with `E = x_extent`.
pub fn empirical_bound_constant(sol: &GammaSolution, grid: &GridSpec) -> Result<f64> {
    let p = sol.params().p();
    let e = grid.x_extent;
    let xs: Vec<f64> = linspace(0.0, e, grid.nx.min(64)).collect();
    let ys: Vec<f64> = linspace(-e, e, grid.ny.min(64)).collect();
    let zs: Vec<f64> = logspace(grid.z_min, e, grid.nz.max(2)).collect();
    let mut pts = Vec::with_capacity(xs.len() * ys.len() * zs.len());
    for &x in &xs {
        for &y in &ys {
            for &z in &zs {
                pts.push(Point3 { x, y, z });
            }
        }
    }
    let ks = pts
        .par_iter()
        .map(|pt| {
            let (u, ux, uy) = big_u_grad(pt, sol)?;
            let n = pt.x + pt.y.abs() + pt.z;
            let np1 = n.powf(p - 1.0);
            Ok((u.max(0.0) / (np1 * n))
                .max(ux.abs() / np1)
                .max(uy.abs() / np1))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ks.into_iter().fold(0.0, f64::max))
}

/// Settings for [`run_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub grid: GridSpec,
    pub line_samples: usize,
    pub t_points: usize,
    pub tangent_samples: usize,
    pub start_points: usize,
    pub gamma_points: usize,
    pub seam_points: usize,
    pub gradient_samples: usize,
    pub seed: u64,
    /// Replaces every check tolerance when set.
    pub tol_override: Option<f64>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            line_samples: 10_000,
            t_points: 64,
            tangent_samples: 10_000,
            start_points: 1_000,
            gamma_points: 1_000,
            seam_points: 1_000,
            gradient_samples: 10_000,
            seed: 0,
            tol_override: None,
        }
    }
}

/// Default tolerances of the suite, by check.
pub mod tol {
    pub const MAJORIZATION: f64 = 1e-9;
    pub const DERIVATIVE: f64 = 1e-9;
    pub const LINE_CONCAVITY: f64 = 1e-7;
    pub const TANGENT: f64 = 1e-9;
    pub const START: f64 = 1e-9;
    pub const SEAMS: f64 = 1e-7;
    pub const GRADIENT: f64 = 1e-6;
    pub const HOMOGENEITY: f64 = 1e-9;
}

/// Every check for one solution, in a fixed order.
pub fn run_suite(sol: &GammaSolution, opts: &SuiteOptions) -> Result<Vec<CheckReport>> {
    let t = |default: f64| opts.tol_override.unwrap_or(default);
    let gtol = opts
        .tol_override
        .map(GammaTolerances::uniform)
        .unwrap_or_default();
    let seed = opts.seed;
    Ok(vec![
        check_gamma_properties(sol, opts.gamma_points, seed, &gtol)?,
        check_inverse_consistency(sol, opts.gamma_points, seed, &gtol)?,
        check_majorization(sol, &opts.grid, t(tol::MAJORIZATION))?,
        check_line_concavity(
            sol,
            opts.line_samples,
            opts.t_points,
            seed,
            t(tol::LINE_CONCAVITY),
        )?,
        check_tangent_majorant(sol, opts.tangent_samples, seed, t(tol::TANGENT))?,
        check_derivative_inequality(sol, &opts.grid, t(tol::DERIVATIVE))?,
        check_start_condition(
            sol,
            &start_grid(1.0, 100.0, opts.start_points),
            t(tol::START),
        )?,
        check_c1_seams(sol, opts.seam_points, opts.grid.x_extent, t(tol::SEAMS))?,
        check_gradient_consistency(sol, opts.gradient_samples, seed, t(tol::GRADIENT))?,
        check_homogeneity(sol, opts.gamma_points, seed, t(tol::HOMOGENEITY))?,
    ])
}

//! Extremal trees whose norm ratios approach the constants `p` and
//! `(alpha + 1) p`.
//!
//! Both constructions start from the valid pair `(f0, g0) = (1/2, 1/2)`. A
//! first split with `dg = -df` sends half the mass to `(0, 1)` and absorbs
//! the rest at `(1, 0)`. From `(0, Y)` each round then does:
//!
//! * martingale: a move along `dg = df` by `δY` (prob `1/(1+pδ)`) or
//!   `-Y/p` (absorbed), then a move along `dg = -df` by `-δY` (prob
//!   `(1+δ-pδ)/(1+δ)`) or `(1/p + δ(1/p - 1)) Y` (absorbed), ending at
//!   `(0, (1+2δ) Y)`;
//! * submartingale: a sure drift `(δY, αδY)`, then a move along `dg = -df`
//!   by `-δY` (prob `(1+αδ-δ(α+1)p)/(1+αδ)`) or
//!   `((1+αδ)/((α+1)p) - δ) Y` (absorbed), ending at `(0, (1+(α+1)δ) Y)`.
//!
//! After the last round the surviving mass stays where it is.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree_sim::{exact_moments, FiniteAdaptedTree, Mode, TreeBuilder, PATH_LIMIT};

/// `f0 = g0` of the valid starting pair.
pub const START: f64 = 0.5;

fn check_common(p: f64, delta: f64, rounds: usize) -> Result<()> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::Domain(format!(
            "p = {p} must be a finite number >= 2"
        )));
    }
    if !(delta > 0.0 && delta < 1.0 / p) {
        return Err(Error::Domain(format!(
            "delta = {delta} must lie in (0, 1/p)"
        )));
    }
    if rounds == 0 {
        return Err(Error::Domain("rounds must be at least 1".into()));
    }
    // one absorbed leaf per split, plus the prefix leaf and the survivor
    if rounds.saturating_mul(2).saturating_add(2) > PATH_LIMIT {
        return Err(Error::Limit(format!(
            "{rounds} rounds exceed the path limit {PATH_LIMIT}"
        )));
    }
    Ok(())
}

fn prefix(mode: Mode) -> Result<(TreeBuilder, usize)> {
    let mut b = TreeBuilder::new(mode, START, START);
    let y = b.add_branch(TreeBuilder::ROOT, 0.5, -START, START)?;
    b.add_branch(TreeBuilder::ROOT, 0.5, START, -START)?;
    Ok((b, y))
}

pub fn build_extremal_martingale(p: f64, delta: f64, rounds: usize) -> Result<FiniteAdaptedTree> {
    check_common(p, delta, rounds)?;
    let (mut b, mut node) = prefix(Mode::Martingale)?;
    let mut y = 2.0 * START;
    let d = delta;
    for _ in 0..rounds {
        let up = b.add_branch(node, 1.0 / (1.0 + p * d), d * y, d * y)?;
        b.add_branch(node, p * d / (1.0 + p * d), -y / p, -y / p)?;
        let t2 = (1.0 / p + d * (1.0 / p - 1.0)) * y;
        node = b.add_branch(up, (1.0 + d - p * d) / (1.0 + d), -d * y, d * y)?;
        b.add_branch(up, p * d / (1.0 + d), t2, -t2)?;
        y *= 1.0 + 2.0 * d;
    }
    b.build()
}

pub fn build_extremal_submartingale(
    p: f64,
    alpha: f64,
    delta: f64,
    rounds: usize,
) -> Result<FiniteAdaptedTree> {
    check_common(p, delta, rounds)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    let cap = 1.0 / ((alpha + 1.0) * p - alpha);
    if !(delta < cap) {
        return Err(Error::Domain(format!(
            "delta = {delta} must be below 1/((alpha+1)p - alpha) = {cap} for the split to exist"
        )));
    }
    let (mut b, mut node) = prefix(Mode::Submartingale { alpha })?;
    let mut y = 2.0 * START;
    let d = delta;
    let ap = (alpha + 1.0) * p;
    for _ in 0..rounds {
        let drift = b.add_branch(node, 1.0, d * y, alpha * d * y)?;
        let t2 = ((1.0 + alpha * d) / ap - d) * y;
        node = b.add_branch(
            drift,
            (1.0 + alpha * d - d * ap) / (1.0 + alpha * d),
            -d * y,
            d * y,
        )?;
        b.add_branch(drift, d * ap / (1.0 + alpha * d), t2, -t2)?;
        y *= 1.0 + (alpha + 1.0) * d;
    }
    b.build()
}

/// Extremal tree for `mode`.
pub fn build_extremal(mode: Mode, p: f64, delta: f64, rounds: usize) -> Result<FiniteAdaptedTree> {
    match mode {
        Mode::Martingale => build_extremal_martingale(p, delta, rounds),
        Mode::Submartingale { alpha } => build_extremal_submartingale(p, alpha, delta, rounds),
    }
}

/// `ceil(horizon / delta)`: rounds for a fixed product `rounds · δ`.
pub fn rounds_for(delta: f64, horizon: f64) -> usize {
    (horizon / delta).ceil().max(1.0) as usize
}

/// `F(s) = 1 - (1+s-ps)(1+2s)^p / ((1+s)(1+ps))` for `s > -1/p` and
/// `G(s) = 1 - (1+αs-s(α+1)p)/(1+αs) · (1+(α+1)s)^p` for `s > -1/(α+1)`.
pub fn rate_functions(s: f64, p: f64, alpha: f64) -> Result<(f64, f64)> {
    if !s.is_finite() || !(s > -1.0 / p) {
        return Err(Error::Domain(format!("F needs s > -1/p, got s = {s}")));
    }
    if !(s > -1.0 / (alpha + 1.0)) {
        return Err(Error::Domain(format!(
            "G needs s > -1/(alpha+1), got s = {s}"
        )));
    }
    let f = 1.0 - (1.0 + s - p * s) * (1.0 + 2.0 * s).powf(p) / ((1.0 + s) * (1.0 + p * s));
    let g = 1.0
        - (1.0 + alpha * s - s * (alpha + 1.0) * p) / (1.0 + alpha * s)
            * (1.0 + (alpha + 1.0) * s).powf(p);
    Ok((f, g))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpnessRow {
    pub mode: Mode,
    pub p: f64,
    pub delta: f64,
    pub rounds: usize,
    pub e_gstar_p: f64,
    pub e_fstar_p: f64,
    /// `(E (g*)^p / E (f*)^p)^(1/p)`
    pub ratio: f64,
    pub e_f_p: f64,
    /// `(E (g*)^p / E |f_n|^p)^(1/p)`
    pub ratio_terminal: f64,
    pub bound: f64,
    /// `F(δ)` or `G(δ)`.
    pub leakage: f64,
}

impl SharpnessRow {
    pub fn alpha(&self) -> f64 {
        match self.mode {
            Mode::Martingale => 0.0,
            Mode::Submartingale { alpha } => alpha,
        }
    }
}

pub fn sharpness_row(mode: Mode, p: f64, delta: f64, rounds: usize) -> Result<SharpnessRow> {
    let tree = build_extremal(mode, p, delta, rounds)?;
    let m = exact_moments(&tree, p)?;
    if !(m.e_gstar_p.is_finite() && m.e_fstar_p.is_finite()) {
        return Err(Error::Limit(format!(
            "moments overflow at delta = {delta}, rounds = {rounds}; reduce rounds"
        )));
    }
    let alpha = match mode {
        Mode::Martingale => 1.0,
        Mode::Submartingale { alpha } => alpha,
    };
    let (f, g) = rate_functions(delta, p, alpha)?;
    Ok(SharpnessRow {
        mode,
        p,
        delta,
        rounds,
        e_gstar_p: m.e_gstar_p,
        e_fstar_p: m.e_fstar_p,
        ratio: m.ratio_fstar,
        e_f_p: m.e_f_p,
        ratio_terminal: m.ratio,
        bound: mode.bound(p),
        leakage: if mode == Mode::Martingale { f } else { g },
    })
}

/// One row per `(delta, rounds)` pair, in input order.
pub fn ratio_sweep(mode: Mode, p: f64, cases: &[(f64, usize)]) -> Result<Vec<SharpnessRow>> {
    cases
        .par_iter()
        .map(|&(d, r)| sharpness_row(mode, p, d, r))
        .collect()
}

pub const CSV_HEADER: &str =
    "mode,p,alpha,delta,rounds,e_gstar_p,e_fstar_p,ratio,e_f_p,ratio_terminal,bound,leakage";

pub fn rows_to_csv(rows: &[SharpnessRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let mode = match r.mode {
            Mode::Martingale => "martingale",
            Mode::Submartingale { .. } => "submartingale",
        };
        out.push_str(&format!(
            "{mode},{},{},{},{},{:e},{:e},{},{:e},{},{},{:e}\n",
            r.p,
            r.alpha(),
            r.delta,
            r.rounds,
            r.e_gstar_p,
            r.e_fstar_p,
            r.ratio,
            r.e_f_p,
            r.ratio_terminal,
            r.bound,
            r.leakage
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub mode: Mode,
    pub p: f64,
    pub bound: f64,
    pub best_ratio: f64,
    /// Linear extrapolation to `δ = 0` through the two smallest `δ`.
    pub extrapolated_limit: Option<f64>,
    /// Ratios non-decreasing as `δ` decreases.
    pub monotone: bool,
    pub within_bound: bool,
    pub rows: Vec<SharpnessRow>,
}

pub fn summarize(mode: Mode, p: f64, rows: &[SharpnessRow]) -> SweepSummary {
    let mut sorted: Vec<&SharpnessRow> = rows.iter().collect();
    sorted.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    let monotone = sorted.windows(2).all(|w| w[1].ratio >= w[0].ratio);
    let extrapolated_limit = match sorted.as_slice() {
        [.., a, b] if a.delta != b.delta => {
            Some(b.ratio + (b.ratio - a.ratio) * b.delta / (a.delta - b.delta))
        }
        _ => None,
    };
    let bound = mode.bound(p);
    SweepSummary {
        mode,
        p,
        bound,
        best_ratio: rows
            .iter()
            .map(|r| r.ratio)
            .fold(f64::NEG_INFINITY, f64::max),
        extrapolated_limit,
        monotone,
        within_bound: rows
            .iter()
            .all(|r| r.ratio <= bound && r.ratio_terminal <= bound),
        rows: rows.to_vec(),
    }
}

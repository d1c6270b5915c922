use rayon::prelude::*;

use super::{FiniteAdaptedTree, Mode};
use crate::error::{Error, Result};
use crate::gamma::GammaSolution;
use crate::special::{big_u_eval, Point3};
use crate::verify::{CheckReport, SlackKind};

/// The tree with `f0` and `g0` both raised by `eps`; increments unchanged.
pub fn epsilon_shift(tree: &FiniteAdaptedTree, eps: f64) -> Result<FiniteAdaptedTree> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::Domain(format!(
            "shift eps = {eps} must be finite and >= 0"
        )));
    }
    let (f0, g0) = tree.root_state();
    tree.with_root(f0 + eps, g0 + eps)
}

/// [`epsilon_shift`] with `eps = 1e-6 max(|f0|, |g0|)`, or `1e-6` for a
/// zero root.
pub fn epsilon_shift_default(tree: &FiniteAdaptedTree) -> Result<FiniteAdaptedTree> {
    let (f0, g0) = tree.root_state();
    let scale = f0.abs().max(g0.abs());
    epsilon_shift(tree, 1e-6 * if scale > 0.0 { scale } else { 1.0 })
}

/// At every internal node, `Σ prob U(f+df, g+dg, g* v |g+dg|) - U(f, g, g*)`
/// divided by `max(1, |U(f,g,g*)|, Σ prob |U(child)|)`; passes iff
/// `<= tol`. When `f0 >= g0 > 0` a second component reports
/// `U(f0, g0, |g0|)` against the same tolerance.
///
/// The tree must be in submartingale mode with `alpha` at most that of
/// `sol`, with `f > 0` at every node and `g0 != 0`; anything else is an
/// input error.
pub fn check_supermartingale_u(
    tree: &FiniteAdaptedTree,
    sol: &GammaSolution,
    tol: f64,
) -> Result<CheckReport> {
    tree.validate()?;
    let params = *sol.params();
    match tree.mode() {
        Mode::Submartingale { alpha } if alpha <= params.alpha() * (1.0 + 1e-12) => {}
        m => {
            return Err(Error::InvalidTree(format!(
                "{m:?} is not an alpha-strong submartingale with alpha <= {}",
                params.alpha()
            )))
        }
    }
    let states = tree.states();
    if let Some(id) = states.iter().position(|&(f, _)| !(f > 0.0)) {
        return Err(Error::InvalidTree(format!(
            "f = {} at node {id}; shift the tree so that f > 0",
            states[id].0
        )));
    }
    let (f0, g0) = tree.root_state();
    if g0 == 0.0 {
        return Err(Error::InvalidTree(
            "g0 = 0 leaves U(f0, g0, g0*) undefined".into(),
        ));
    }
    let mut gstar = vec![g0.abs(); states.len()];
    for id in 1..states.len() {
        let parent = tree.branch(id).map(|b| b.parent).unwrap_or(0);
        gstar[id] = gstar[parent].max(states[id].1.abs());
    }
    let u_at = |id: usize| {
        big_u_eval(
            &Point3 {
                x: states[id].0,
                y: states[id].1,
                z: gstar[id],
            },
            sol,
        )
    };
    let internal: Vec<usize> = (0..states.len()).filter(|&id| !tree.is_leaf(id)).collect();
    let slacks = internal
        .par_iter()
        .map(|&id| {
            let here = u_at(id)?;
            let mut mean = 0.0;
            let mut mass = 0.0;
            for &c in tree.children(id) {
                let pr = tree.branch(c).map(|b| b.prob).unwrap_or(0.0);
                let u = u_at(c)?;
                mean += pr * u;
                mass += pr * u.abs();
            }
            Ok((mean - here) / 1f64.max(here.abs()).max(mass))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = crate::verify::worst_of(&slacks, SlackKind::AtMost)
        .map(|(i, v)| {
            let id = internal[i];
            (
                v,
                format!(
                    "node {id} f={:e} g={:e} g*={:e}",
                    states[id].0, states[id].1, gstar[id]
                ),
            )
        })
        .unwrap_or((f64::NEG_INFINITY, "no internal nodes".into()));
    let nodes = CheckReport::new(
        "supermartingale_nodes",
        params,
        internal.len(),
        worst,
        tol,
        SlackKind::AtMost,
    );
    let mut parts = vec![nodes];
    if f0 >= g0 && g0 > 0.0 {
        let u0 = big_u_eval(
            &Point3 {
                x: f0,
                y: g0,
                z: g0,
            },
            sol,
        )?;
        parts.push(CheckReport::new(
            "initial_value",
            params,
            1,
            (u0, format!("f0={f0:e} g0={g0:e}")),
            tol,
            SlackKind::AtMost,
        ));
    }
    Ok(CheckReport::bundle("supermartingale_u", params, parts))
}

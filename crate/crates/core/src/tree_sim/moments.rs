use serde::{Deserialize, Serialize};

use super::FiniteAdaptedTree;
use crate::error::{Error, Result};
use crate::sum::NeumaierSum;

/// Largest number of paths [`exact_moments`] will enumerate.
pub const PATH_LIMIT: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub p: f64,
    /// `E (g*)^p`
    pub e_gstar_p: f64,
    /// `E |f_n|^p` at the terminal time
    pub e_f_p: f64,
    /// `E (f*)^p`
    pub e_fstar_p: f64,
    /// `(E (g*)^p / E |f_n|^p)^(1/p)`
    pub ratio: f64,
    /// `(E (g*)^p / E (f*)^p)^(1/p)`
    pub ratio_fstar: f64,
    pub paths: usize,
}

pub(crate) fn norm_ratio(num: f64, den: f64, p: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        (num / den).powf(1.0 / p)
    }
}

impl MomentSummary {
    pub fn from_moments(p: f64, e_gstar_p: f64, e_f_p: f64, e_fstar_p: f64, paths: usize) -> Self {
        Self {
            p,
            e_gstar_p,
            e_f_p,
            e_fstar_p,
            ratio: norm_ratio(e_gstar_p, e_f_p, p),
            ratio_fstar: norm_ratio(e_gstar_p, e_fstar_p, p),
            paths,
        }
    }
}

pub fn exact_moments(tree: &FiniteAdaptedTree, p: f64) -> Result<MomentSummary> {
    exact_moments_with_limit(tree, p, PATH_LIMIT)
}

/// Probability-weighted sums over all root-to-leaf paths of `(g*)^p`,
/// `|f_n|^p` and `(f*)^p`, with maxima taken over the whole path including
/// the root.
pub fn exact_moments_with_limit(
    tree: &FiniteAdaptedTree,
    p: f64,
    path_limit: usize,
) -> Result<MomentSummary> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!("p = {p} must be finite and >= 1")));
    }
    if tree.leaf_count() > path_limit {
        return Err(Error::Limit(format!(
            "{} paths exceed the enumeration limit {path_limit}; use Monte Carlo",
            tree.leaf_count()
        )));
    }
    tree.validate()?;
    let n = tree.node_count();
    let (f0, g0) = tree.root_state();
    let mut prob = vec![1.0; n];
    let mut f = vec![f0; n];
    let mut g = vec![g0; n];
    let mut fstar = vec![f0.abs(); n];
    let mut gstar = vec![g0.abs(); n];
    let (mut sg, mut sf, mut sfs) = (NeumaierSum::new(), NeumaierSum::new(), NeumaierSum::new());
    for id in 0..n {
        if let Some(b) = tree.branch(id) {
            let q = b.parent;
            prob[id] = prob[q] * b.prob;
            f[id] = f[q] + b.df;
            g[id] = g[q] + b.dg;
            fstar[id] = fstar[q].max(f[id].abs());
            gstar[id] = gstar[q].max(g[id].abs());
        }
        if tree.is_leaf(id) {
            sg.add(prob[id] * gstar[id].powf(p));
            sf.add(prob[id] * f[id].abs().powf(p));
            sfs.add(prob[id] * fstar[id].powf(p));
        }
    }
    Ok(MomentSummary::from_moments(
        p,
        sg.value(),
        sf.value(),
        sfs.value(),
        tree.leaf_count(),
    ))
}

#[cfg(test)]
mod tests {
    use super::super::{Mode, TreeBuilder};
    use super::*;

    #[test]
    fn constant_pair_has_ratio_one() {
        let mut b = TreeBuilder::new(Mode::Submartingale { alpha: 1.0 }, 2.0, 2.0);
        b.add_branch(0, 1.0, 0.0, 0.0).unwrap();
        let m = exact_moments(&b.build().unwrap(), 3.0).unwrap();
        assert_eq!(m.ratio, 1.0);
        assert_eq!(m.e_gstar_p, 8.0);
    }

    #[test]
    fn path_limit_is_enforced() {
        let mut b = TreeBuilder::new(Mode::Martingale, 0.0, 0.0);
        b.add_branch(0, 0.5, 1.0, 1.0).unwrap();
        b.add_branch(0, 0.5, -1.0, -1.0).unwrap();
        let t = b.build().unwrap();
        assert!(matches!(
            exact_moments_with_limit(&t, 2.0, 1),
            Err(Error::Limit(_))
        ));
        assert!(matches!(exact_moments(&t, 0.5), Err(Error::Domain(_))));
    }
}

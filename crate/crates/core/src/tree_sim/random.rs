use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{FiniteAdaptedTree, Mode, TreeBuilder};
use crate::error::Result;

/// Shape and root distribution of random trees. All leaves sit at a depth
/// drawn uniformly from `1..=max_depth`; each node has between
/// `min_branching` and `max_branching` children. The root is
/// `f0 ~ U[f0_range]`, `g0 = r f0` with `r ~ U[g0_ratio]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomTreeSpec {
    pub max_depth: usize,
    pub min_branching: usize,
    pub max_branching: usize,
    pub f0_range: (f64, f64),
    pub g0_ratio: (f64, f64),
}

impl Default for RandomTreeSpec {
    fn default() -> Self {
        Self {
            max_depth: 6,
            min_branching: 1,
            max_branching: 3,
            f0_range: (0.0, 2.0),
            g0_ratio: (-1.0, 1.0),
        }
    }
}

fn uniform<R: Rng>(rng: &mut R, (a, b): (f64, f64)) -> f64 {
    if a == b {
        a
    } else {
        rng.random_range(a..=b)
    }
}

fn probabilities<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// A martingale `f` with `g` its transform by random predictable signs
/// `v = ±1`. Increments are drawn uniformly from `[-1, 1]` and centered.
pub fn random_martingale_tree<R: Rng>(
    rng: &mut R,
    spec: &RandomTreeSpec,
) -> Result<FiniteAdaptedTree> {
    let depth = rng.random_range(1..=spec.max_depth.max(1));
    let f0 = uniform(rng, spec.f0_range);
    let sign = |rng: &mut R| if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let mut b = TreeBuilder::new(Mode::Martingale, f0, sign(rng) * f0);
    let mut frontier = vec![TreeBuilder::ROOT];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &node in &frontier {
            let k = rng.random_range(spec.min_branching.max(2)..=spec.max_branching.max(2));
            let probs = probabilities(rng, k);
            let mut df: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let mean: f64 = probs.iter().zip(&df).map(|(p, d)| p * d).sum();
            df.iter_mut().for_each(|d| *d -= mean);
            let v = sign(rng);
            for (p, d) in probs.into_iter().zip(df) {
                next.push(b.add_branch(node, p, d, v * d)?);
            }
        }
        frontier = next;
    }
    b.build()
}

/// A non-negative submartingale `f` and an α-strongly subordinate `g`.
/// Increments `df ∈ [-f, 1]` are shifted up when their mean is negative;
/// `dg = u |df|` with `u ∈ [-1, 1]`, scaled down as a whole when the drift
/// of `g` exceeds `alpha` times the drift of `f`.
pub fn random_submartingale_tree<R: Rng>(
    rng: &mut R,
    spec: &RandomTreeSpec,
    alpha: f64,
) -> Result<FiniteAdaptedTree> {
    let depth = rng.random_range(1..=spec.max_depth.max(1));
    let f0 = uniform(rng, (spec.f0_range.0.max(0.0), spec.f0_range.1.max(0.0)));
    let g0 = uniform(rng, spec.g0_ratio).clamp(-1.0, 1.0) * f0;
    let mut b = TreeBuilder::new(Mode::Submartingale { alpha }, f0, g0);
    let mut frontier = vec![(TreeBuilder::ROOT, f0)];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &(node, f) in &frontier {
            let k = rng.random_range(spec.min_branching.max(1)..=spec.max_branching.max(1));
            let probs = probabilities(rng, k);
            let mut df: Vec<f64> = (0..k).map(|_| rng.random_range(-f..=1.0)).collect();
            let mean: f64 = probs.iter().zip(&df).map(|(p, d)| p * d).sum();
            if mean < 0.0 {
                df.iter_mut().for_each(|d| *d -= mean);
            }
            let mean_f: f64 = probs
                .iter()
                .zip(&df)
                .map(|(p, d)| p * d)
                .sum::<f64>()
                .max(0.0);
            let mut dg: Vec<f64> = df
                .iter()
                .map(|d| rng.random_range(-1.0..=1.0) * d.abs())
                .collect();
            let mean_g: f64 = probs.iter().zip(&dg).map(|(p, d)| p * d).sum();
            if mean_g.abs() > alpha * mean_f {
                let s = alpha * mean_f / mean_g.abs();
                dg.iter_mut().for_each(|d| *d *= s);
            }
            for ((p, d), e) in probs.into_iter().zip(df).zip(dg) {
                // guard the f >= 0 constraint against rounding in the shift
                let d = d.max(-f);
                next.push((b.add_branch(node, p, d, e.clamp(-d.abs(), d.abs()))?, f + d));
            }
        }
        frontier = next;
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::sample_rng;

    #[test]
    fn generated_trees_validate() {
        let spec = RandomTreeSpec::default();
        for i in 0..200 {
            let mut rng = sample_rng(11, i);
            let m = random_martingale_tree(&mut rng, &spec).unwrap();
            assert!(m.depth() >= 1 && m.depth() <= 6);
            let s = random_submartingale_tree(&mut rng, &spec, 0.3).unwrap();
            assert!(s.states().iter().all(|&(f, _)| f >= 0.0));
        }
    }
}

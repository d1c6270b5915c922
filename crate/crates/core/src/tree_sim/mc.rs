use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::moments::MomentSummary;
use super::{FiniteAdaptedTree, Mode};
use crate::error::{Error, Result};
use crate::sum::NeumaierSum;
use crate::verify::sample_rng;

/// Paths per random stream. Batch `i` draws from stream `i` of the seed, and
/// batch sums are combined in batch order, so estimates do not depend on
/// the number of worker threads.
pub const MC_BATCH: usize = 1024;

/// What an estimator needs from one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub f_final: f64,
    pub fstar: f64,
    pub gstar: f64,
}

pub trait PathGenerator: Sync {
    /// Subordination mode the samples respect.
    fn mode(&self) -> Mode;
    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<PathSample>;
}

/// Sample means with standard errors; ratio errors by the delta method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub summary: MomentSummary,
    pub n_paths: usize,
    pub se_gstar_p: f64,
    pub se_f_p: f64,
    pub se_fstar_p: f64,
    pub se_ratio: f64,
    pub se_ratio_fstar: f64,
    /// The constant of the maximal inequality for the generator's mode.
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    n: usize,
    a: NeumaierSum,
    b: NeumaierSum,
    c: NeumaierSum,
    aa: NeumaierSum,
    bb: NeumaierSum,
    cc: NeumaierSum,
    ab: NeumaierSum,
    ac: NeumaierSum,
}

impl Acc {
    fn push(&mut self, a: f64, b: f64, c: f64) {
        self.n += 1;
        self.a.add(a);
        self.b.add(b);
        self.c.add(c);
        self.aa.add(a * a);
        self.bb.add(b * b);
        self.cc.add(c * c);
        self.ab.add(a * b);
        self.ac.add(a * c);
    }

    fn merge(&mut self, o: &Acc) {
        self.n += o.n;
        self.a.merge(&o.a);
        self.b.merge(&o.b);
        self.c.merge(&o.c);
        self.aa.merge(&o.aa);
        self.bb.merge(&o.bb);
        self.cc.merge(&o.cc);
        self.ab.merge(&o.ab);
        self.ac.merge(&o.ac);
    }
}

pub fn mc_estimate<G: PathGenerator + ?Sized>(
    generator: &G,
    p: f64,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_paths < 100 {
        return Err(Error::Domain(format!(
            "n_paths = {n_paths} is below the minimum of 100"
        )));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!("p = {p} must be finite and >= 1")));
    }
    let batches = n_paths.div_ceil(MC_BATCH);
    let parts = (0..batches)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            let count = MC_BATCH.min(n_paths - i * MC_BATCH);
            let mut acc = Acc::default();
            for _ in 0..count {
                let s = generator.sample(&mut rng)?;
                acc.push(s.gstar.powf(p), s.f_final.abs().powf(p), s.fstar.powf(p));
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut acc = Acc::default();
    for part in &parts {
        acc.merge(part);
    }
    let n = acc.n as f64;
    let (ma, mb, mc) = (acc.a.value() / n, acc.b.value() / n, acc.c.value() / n);
    let cov = |sxy: f64, mx: f64, my: f64| (sxy - n * mx * my) / (n - 1.0);
    let vaa = cov(acc.aa.value(), ma, ma).max(0.0);
    let vbb = cov(acc.bb.value(), mb, mb).max(0.0);
    let vcc = cov(acc.cc.value(), mc, mc).max(0.0);
    let (vab, vac) = (cov(acc.ab.value(), ma, mb), cov(acc.ac.value(), ma, mc));
    let summary = MomentSummary::from_moments(p, ma, mb, mc, acc.n);
    let se_log = |vyy: f64, vxy: f64, my: f64| {
        let v = vaa / (ma * ma) + vyy / (my * my) - 2.0 * vxy / (ma * my);
        (v.max(0.0) / n).sqrt() / p
    };
    Ok(McEstimate {
        summary,
        n_paths: acc.n,
        se_gstar_p: (vaa / n).sqrt(),
        se_f_p: (vbb / n).sqrt(),
        se_fstar_p: (vcc / n).sqrt(),
        se_ratio: summary.ratio * se_log(vbb, vab, mb),
        se_ratio_fstar: summary.ratio_fstar * se_log(vcc, vac, mc),
        bound: generator.mode().bound(p),
    })
}

/// One uniformly random bit per call, 64 per generator draw.
pub(crate) struct Bits {
    word: u64,
    left: u32,
}

impl Bits {
    pub(crate) fn new() -> Self {
        Self { word: 0, left: 0 }
    }

    pub(crate) fn next(&mut self, rng: &mut ChaCha8Rng) -> bool {
        if self.left == 0 {
            self.word = rng.next_u64();
            self.left = 64;
        }
        let b = self.word & 1 == 1;
        self.word >>= 1;
        self.left -= 1;
        b
    }
}

/// Predictable integrand values in `[-1, 1]`, indexed by step `n >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Integrand {
    Constant {
        value: f64,
    },
    /// `+1` at even steps, `-1` at odd steps.
    Alternating,
    /// An independent fair sign drawn before each step.
    RandomSign,
    /// Value `v_k` from step `n_k` on; `jumps` sorted with `n_0 = 0`.
    Piecewise {
        jumps: Vec<(usize, f64)>,
    },
}

impl Integrand {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.abs() <= 1.0;
        let fine = match self {
            Integrand::Constant { value } => ok(*value),
            Integrand::Alternating | Integrand::RandomSign => true,
            Integrand::Piecewise { jumps } => {
                jumps.first().is_some_and(|j| j.0 == 0)
                    && jumps.windows(2).all(|w| w[0].0 < w[1].0)
                    && jumps.iter().all(|j| ok(j.1))
            }
        };
        if fine {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "integrand {self:?} must take values in [-1, 1]"
            )))
        }
    }

    pub(crate) fn value(&self, n: usize, rng: &mut ChaCha8Rng, bits: &mut Bits) -> f64 {
        match self {
            Integrand::Constant { value } => *value,
            Integrand::Alternating => {
                if n.is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                }
            }
            Integrand::RandomSign => {
                if bits.next(rng) {
                    1.0
                } else {
                    -1.0
                }
            }
            Integrand::Piecewise { jumps } => {
                let k = jumps.partition_point(|j| j.0 <= n);
                jumps[k.saturating_sub(1)].1
            }
        }
    }
}

/// Walk down a tree choosing branches by their probabilities.
#[derive(Debug, Clone)]
pub struct TreeSampler {
    tree: FiniteAdaptedTree,
}

impl TreeSampler {
    pub fn new(tree: FiniteAdaptedTree) -> Self {
        Self { tree }
    }

    pub fn tree(&self) -> &FiniteAdaptedTree {
        &self.tree
    }
}

impl PathGenerator for TreeSampler {
    fn mode(&self) -> Mode {
        self.tree.mode()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<PathSample> {
        let (mut f, mut g) = self.tree.root_state();
        let (mut fstar, mut gstar) = (f.abs(), g.abs());
        let mut node = 0;
        while !self.tree.is_leaf(node) {
            let children = self.tree.children(node);
            let u: f64 = rng.random();
            let mut cum = 0.0;
            let mut pick = *children.last().expect("internal node has children");
            for &c in children {
                cum += self.tree.branch(c).map_or(0.0, |b| b.prob);
                if u < cum {
                    pick = c;
                    break;
                }
            }
            let b = self.tree.branch(pick).expect("child has a branch");
            f += b.df;
            g += b.dg;
            fstar = fstar.max(f.abs());
            gstar = gstar.max(g.abs());
            node = pick;
        }
        Ok(PathSample {
            f_final: f,
            fstar,
            gstar,
        })
    }
}

/// `f` a simple ±1 random walk from `f0`; `g0 = v_0 f0` and `dg_n = v_n df_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomWalkTransform {
    steps: usize,
    f0: f64,
    rule: Integrand,
}

impl RandomWalkTransform {
    pub fn new(steps: usize, f0: f64, rule: Integrand) -> Result<Self> {
        rule.validate()?;
        Ok(Self { steps, f0, rule })
    }
}

impl PathGenerator for RandomWalkTransform {
    fn mode(&self) -> Mode {
        Mode::Martingale
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<PathSample> {
        let mut bits = Bits::new();
        let mut f = self.f0;
        let mut g = self.rule.value(0, rng, &mut bits) * f;
        let (mut fstar, mut gstar) = (f.abs(), g.abs());
        for n in 1..=self.steps {
            let v = self.rule.value(n, rng, &mut bits);
            let df = if bits.next(rng) { 1.0 } else { -1.0 };
            f += df;
            g += v * df;
            fstar = fstar.max(f.abs());
            gstar = gstar.max(g.abs());
        }
        Ok(PathSample {
            f_final: f,
            fstar,
            gstar,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_runs() {
        let g = RandomWalkTransform::new(10, 0.0, Integrand::Constant { value: 1.0 }).unwrap();
        assert!(matches!(mc_estimate(&g, 2.0, 99, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn identity_transform_gives_equal_moments() {
        let g = RandomWalkTransform::new(20, 0.0, Integrand::Constant { value: 1.0 }).unwrap();
        let e = mc_estimate(&g, 2.0, 2000, 3).unwrap();
        assert_eq!(e.summary.e_gstar_p, e.summary.e_fstar_p);
        assert!(e.summary.ratio <= 2.0);
    }

    #[test]
    fn piecewise_integrand_steps() {
        let h = Integrand::Piecewise {
            jumps: vec![(0, 1.0), (3, -0.5)],
        };
        h.validate().unwrap();
        let mut rng = sample_rng(0, 0);
        let mut bits = Bits::new();
        let vals: Vec<f64> = (0..5).map(|n| h.value(n, &mut rng, &mut bits)).collect();
        assert_eq!(vals, vec![1.0, 1.0, 1.0, -0.5, -0.5]);
        assert!(Integrand::Piecewise {
            jumps: vec![(1, 1.0)]
        }
        .validate()
        .is_err());
        assert!(Integrand::Constant { value: 1.5 }.validate().is_err());
    }
}

//! Finite adapted trees carrying a pair `(f, g)`, their exact moments,
//! Monte Carlo estimation and a discretized stochastic integral.
//!
//! A tree is stored as an arena: node 0 is the root, and every node records
//! the branch leading into it (`prob`, `df`, `dg`). Parents always precede
//! their children, so path quantities are computed in a single forward pass.

mod ito;
mod mc;
mod moments;
mod random;
mod supermart;

pub use ito::{discretize_ito, ItoPath, ItoScheme, ReflectedWalk};
pub use mc::{
    mc_estimate, Integrand, McEstimate, PathGenerator, PathSample, RandomWalkTransform,
    TreeSampler, MC_BATCH,
};
pub use moments::{exact_moments, exact_moments_with_limit, MomentSummary, PATH_LIMIT};
pub use random::{random_martingale_tree, random_submartingale_tree, RandomTreeSpec};
pub use supermart::{check_supermartingale_u, epsilon_shift, epsilon_shift_default};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used when validating tree constraints. Drift conditions
/// are measured against `Σ prob |df| + |f| + |g|` at the node, the
/// subordination condition against `|df|`.
pub const VALIDATION_TOL: f64 = 1e-12;

/// Deepest tree accepted by the nested JSON form.
pub const JSON_MAX_DEPTH: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Mode {
    /// `f` and `g` martingales, `|dg| <= |df|`.
    Martingale,
    /// `f >= 0` submartingale, `|dg| <= |df|` and
    /// `|E(dg | past)| <= alpha E(df | past)`.
    Submartingale { alpha: f64 },
}

impl Mode {
    /// Constant of the maximal inequality: `p` or `(alpha + 1) p`.
    pub fn bound(&self, p: f64) -> f64 {
        match self {
            Mode::Martingale => p,
            Mode::Submartingale { alpha } => (alpha + 1.0) * p,
        }
    }
}

const NO_PARENT: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq)]
struct Node {
    parent: usize,
    prob: f64,
    df: f64,
    dg: f64,
    children: Vec<usize>,
}

/// Branch data of a non-root node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchView<'a> {
    pub parent: usize,
    pub prob: f64,
    pub df: f64,
    pub dg: f64,
    pub children: &'a [usize],
}

/// A validated finite tree. Only [`TreeBuilder::build`], JSON parsing and
/// the constructors built on them create one, and all of them validate.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteAdaptedTree {
    mode: Mode,
    f0: f64,
    g0: f64,
    nodes: Vec<Node>,
    depth: usize,
    leaves: usize,
}

pub struct TreeBuilder {
    mode: Mode,
    f0: f64,
    g0: f64,
    nodes: Vec<Node>,
}

impl TreeBuilder {
    pub fn new(mode: Mode, f0: f64, g0: f64) -> Self {
        let root = Node {
            parent: NO_PARENT,
            prob: 1.0,
            df: 0.0,
            dg: 0.0,
            children: Vec::new(),
        };
        Self {
            mode,
            f0,
            g0,
            nodes: vec![root],
        }
    }

    pub const ROOT: usize = 0;

    /// Add a branch out of `parent` and return the id of the new node.
    pub fn add_branch(&mut self, parent: usize, prob: f64, df: f64, dg: f64) -> Result<usize> {
        if parent >= self.nodes.len() {
            return Err(Error::InvalidTree(format!("unknown parent node {parent}")));
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            parent,
            prob,
            df,
            dg,
            children: Vec::new(),
        });
        self.nodes[parent].children.push(id);
        Ok(id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn build(self) -> Result<FiniteAdaptedTree> {
        let mut depths = vec![0usize; self.nodes.len()];
        for id in 1..self.nodes.len() {
            depths[id] = depths[self.nodes[id].parent] + 1;
        }
        let tree = FiniteAdaptedTree {
            mode: self.mode,
            f0: self.f0,
            g0: self.g0,
            depth: depths.into_iter().max().unwrap_or(0),
            leaves: self.nodes.iter().filter(|n| n.children.is_empty()).count(),
            nodes: self.nodes,
        };
        tree.validate()?;
        Ok(tree)
    }
}

impl FiniteAdaptedTree {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn root_state(&self) -> (f64, f64) {
        (self.f0, self.g0)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of root-to-leaf paths.
    pub fn leaf_count(&self) -> usize {
        self.leaves
    }

    pub fn children(&self, id: usize) -> &[usize] {
        &self.nodes[id].children
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        self.nodes[id].children.is_empty()
    }

    /// The branch leading into `id`; `None` for the root.
    pub fn branch(&self, id: usize) -> Option<BranchView<'_>> {
        let n = self.nodes.get(id)?;
        (n.parent != NO_PARENT).then_some(BranchView {
            parent: n.parent,
            prob: n.prob,
            df: n.df,
            dg: n.dg,
            children: &n.children,
        })
    }

    /// `(f, g)` at every node, indexed by node id.
    pub fn states(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.nodes.len());
        out.push((self.f0, self.g0));
        for n in &self.nodes[1..] {
            let (f, g) = out[n.parent];
            out.push((f + n.df, g + n.dg));
        }
        out
    }

    /// Check every structural and subordination constraint; see
    /// [`VALIDATION_TOL`] for the slack allowed to rounding.
    pub fn validate(&self) -> Result<()> {
        let tol = VALIDATION_TOL;
        let bad = |msg: String| Err(Error::InvalidTree(msg));
        if !self.f0.is_finite() || !self.g0.is_finite() {
            return bad("root state must be finite".into());
        }
        if self.g0.abs() > self.f0.abs() * (1.0 + tol) {
            return bad(format!(
                "|g0| = {} exceeds |f0| = {}",
                self.g0.abs(),
                self.f0.abs()
            ));
        }
        if let Mode::Submartingale { alpha } = self.mode {
            if !(0.0..=1.0).contains(&alpha) {
                return bad(format!("alpha = {alpha} outside [0, 1]"));
            }
            if self.f0 < 0.0 {
                return bad(format!("submartingale root f0 = {} is negative", self.f0));
            }
        }
        for (id, n) in self.nodes.iter().enumerate().skip(1) {
            if n.parent >= id {
                return bad(format!("node {id} does not follow its parent"));
            }
            if !(n.prob > 0.0 && n.prob <= 1.0) || !n.df.is_finite() || !n.dg.is_finite() {
                return bad(format!(
                    "node {id}: prob must lie in (0, 1], increments finite"
                ));
            }
            if n.dg.abs() > n.df.abs() * (1.0 + tol) {
                return bad(format!(
                    "node {id}: |dg| = {} > |df| = {}",
                    n.dg.abs(),
                    n.df.abs()
                ));
            }
        }
        let states = self.states();
        for (id, n) in self.nodes.iter().enumerate() {
            if n.children.is_empty() {
                continue;
            }
            let mut total = 0.0;
            let mut mean_f = 0.0;
            let mut mean_g = 0.0;
            let mut scale = 0.0;
            for &c in &n.children {
                let b = &self.nodes[c];
                total += b.prob;
                mean_f += b.prob * b.df;
                mean_g += b.prob * b.dg;
                scale += b.prob * b.df.abs();
            }
            if (total - 1.0).abs() > tol * n.children.len() as f64 {
                return bad(format!("node {id}: branch probabilities sum to {total}"));
            }
            let slack = tol * (scale + states[id].0.abs() + states[id].1.abs());
            match self.mode {
                Mode::Martingale => {
                    if mean_f.abs() > slack || mean_g.abs() > slack {
                        return bad(format!(
                            "node {id}: drifts E df = {mean_f:e}, E dg = {mean_g:e} must vanish"
                        ));
                    }
                }
                Mode::Submartingale { alpha } => {
                    if mean_f < -slack {
                        return bad(format!("node {id}: E df = {mean_f:e} < 0"));
                    }
                    if mean_g.abs() > alpha * mean_f.max(0.0) + slack {
                        return bad(format!(
                            "node {id}: |E dg| = {:e} > alpha E df = {:e}",
                            mean_g.abs(),
                            alpha * mean_f
                        ));
                    }
                    for &c in &n.children {
                        let f = states[c].0;
                        if f < -tol * states[id].0.abs().max(self.nodes[c].df.abs()) {
                            return bad(format!("node {c}: f = {f:e} < 0"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// The same tree with the root moved to `(f0, g0)`, validated again.
    pub fn with_root(&self, f0: f64, g0: f64) -> Result<Self> {
        let t = Self {
            f0,
            g0,
            ..self.clone()
        };
        t.validate()?;
        Ok(t)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_doc()?)?)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_doc()?)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: TreeDoc = serde_json::from_str(s)?;
        Self::from_doc(&doc)
    }

    pub fn to_doc(&self) -> Result<TreeDoc> {
        if self.depth > JSON_MAX_DEPTH {
            return Err(Error::Limit(format!(
                "tree depth {} exceeds the nested JSON limit of {JSON_MAX_DEPTH}",
                self.depth
            )));
        }
        fn branches(t: &FiniteAdaptedTree, id: usize) -> Vec<BranchDoc> {
            t.nodes[id]
                .children
                .iter()
                .map(|&c| {
                    let n = &t.nodes[c];
                    BranchDoc {
                        prob: n.prob,
                        df: n.df,
                        dg: n.dg,
                        branches: branches(t, c),
                    }
                })
                .collect()
        }
        Ok(TreeDoc {
            mode: self.mode,
            f0: self.f0,
            g0: self.g0,
            branches: branches(self, 0),
        })
    }

    pub fn from_doc(doc: &TreeDoc) -> Result<Self> {
        fn add(b: &mut TreeBuilder, parent: usize, branches: &[BranchDoc]) -> Result<()> {
            for br in branches {
                let id = b.add_branch(parent, br.prob, br.df, br.dg)?;
                add(b, id, &br.branches)?;
            }
            Ok(())
        }
        let mut b = TreeBuilder::new(doc.mode, doc.f0, doc.g0);
        add(&mut b, TreeBuilder::ROOT, &doc.branches)?;
        b.build()
    }
}

/// Nested JSON form of a tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDoc {
    pub mode: Mode,
    pub f0: f64,
    pub g0: f64,
    #[serde(default)]
    pub branches: Vec<BranchDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchDoc {
    pub prob: f64,
    pub df: f64,
    pub dg: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub branches: Vec<BranchDoc>,
}

/// A tree carrying `f` only, to be turned into a pair by a transform.
#[derive(Debug, Clone, PartialEq)]
pub struct FTree {
    mode: Mode,
    f0: f64,
    /// `(parent, prob, df)` per non-root node, parents first.
    branches: Vec<(usize, f64, f64)>,
}

impl FTree {
    pub fn new(mode: Mode, f0: f64) -> Self {
        Self {
            mode,
            f0,
            branches: Vec::new(),
        }
    }

    pub const ROOT: usize = 0;

    pub fn add_branch(&mut self, parent: usize, prob: f64, df: f64) -> Result<usize> {
        if parent > self.branches.len() {
            return Err(Error::InvalidTree(format!("unknown parent node {parent}")));
        }
        self.branches.push((parent, prob, df));
        Ok(self.branches.len())
    }

    pub fn node_count(&self) -> usize {
        self.branches.len() + 1
    }
}

/// Predictable multipliers for [`build_transform_tree`]: `v0` multiplies
/// `f0`, and `per_node[id]` multiplies every increment leaving node `id`.
#[derive(Debug, Clone, PartialEq)]
pub struct Signs {
    pub v0: f64,
    pub per_node: Vec<f64>,
}

impl Signs {
    pub fn constant(v: f64, nodes: usize) -> Self {
        Self {
            v0: v,
            per_node: vec![v; nodes],
        }
    }
}

/// `g0 = v0 f0` and `dg = v df` on each branch, with `v` the value at the
/// branch's parent node.
pub fn build_transform_tree(f_tree: &FTree, signs: &Signs) -> Result<FiniteAdaptedTree> {
    if signs.per_node.len() < f_tree.node_count() {
        return Err(Error::InvalidTree(format!(
            "{} multipliers for {} nodes",
            signs.per_node.len(),
            f_tree.node_count()
        )));
    }
    if let Some(v) = std::iter::once(&signs.v0)
        .chain(&signs.per_node)
        .find(|v| !(v.abs() <= 1.0))
    {
        return Err(Error::Domain(format!(
            "transform multiplier {v} exceeds 1 in absolute value"
        )));
    }
    let mut b = TreeBuilder::new(f_tree.mode, f_tree.f0, signs.v0 * f_tree.f0);
    for &(parent, prob, df) in &f_tree.branches {
        b.add_branch(parent, prob, df, signs.per_node[parent] * df)?;
    }
    b.build()
}

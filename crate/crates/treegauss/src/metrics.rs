//! The two (semi)metrics attached to the Gaussian field, and the dyadic
//! scale partition.
//!
//! For an ancestor pair `t <= s` with branch prefix sums
//! `A(u) = sum over v in [root, u] of alpha(v)^2`:
//!
//! ```text
//! d(t, s)   = max over r in (t, s] of sigma(r) * sqrt(A(r) - A(t))
//! dX(t, s)^2 = (sigma(t) - sigma(s))^2 * A(t) + sigma(s)^2 * (A(s) - A(t))
//! ```
//!
//! and for incomparable pairs both extend through the meet `m = t /\ s`:
//! `d` additively, `dX` by the three independent-increment terms. `d` never
//! involves `alpha(root)` (all sums start strictly below the top node of an
//! interval); `dX` does, through `A(m)`.
//!
//! `dhat` is `d` computed with the dyadic rounding `sigma_hat = 2^(-k)`
//! where `2^(-k-1) < sigma <= 2^(-k)`; it satisfies `d <= dhat <= 2 d`
//! pointwise. The class index `k` also defines the [`LevelPartition`] whose
//! cells cut every branch into order intervals of geometrically shrinking
//! scale.
//!
//! A [`WeightedTree`] owns the per-level (or per-node) tables so that each
//! distance evaluation costs one pass over the connecting path, and curve
//! sweeps on chains can reuse the prefix arrays directly.

use crate::tree::{Tree, TreeKind};
use crate::weights::WeightSystem;
use crate::{Error, NodeRef, Result};

/// Which distance to evaluate.
#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    /// Tree metric of the field (supremum form).
    D,
    /// Canonical Gaussian metric `(E|X_t - X_s|^2)^(1/2)`.
    Dx,
    /// Tree metric under dyadically rounded scales.
    DHat,
}

impl MetricKind {
    pub fn label(self) -> &'static str {
        match self {
            MetricKind::D => "d",
            MetricKind::Dx => "dx",
            MetricKind::DHat => "dhat",
        }
    }

    /// True when balls around a point grow monotonically along branches,
    /// which holds for the supremum-form metrics but not for `dX`.
    pub fn order_monotone(self) -> bool {
        !matches!(self, MetricKind::Dx)
    }
}

/// Exact power of two, including the subnormal range.
pub(crate) fn pow2(e: i32) -> f64 {
    if (-1022..=1023).contains(&e) {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else if e < -1074 {
        0.0
    } else if e <= -1023 {
        f64::from_bits(1u64 << (e + 1074))
    } else {
        f64::INFINITY
    }
}

/// Dyadic class of a positive scale: the unique `k` with
/// `2^(-k-1) < sigma <= 2^(-k)`. Exact for every representable input.
pub fn dyadic_class(sigma: f64) -> Result<i32> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "dyadic class needs a positive finite scale, got {sigma}"
        )));
    }
    let mut k = (-sigma.log2()).floor() as i32;
    while sigma > pow2(-k) {
        k -= 1;
    }
    while sigma <= pow2(-k - 1) {
        k += 1;
    }
    Ok(k)
}

/// `2^(-k)` for the class of `sigma`.
pub fn sigma_hat(sigma: f64) -> Result<f64> {
    Ok(pow2(-dyadic_class(sigma)?))
}

/// Class sentinel for scales that underflowed to zero in evaluation.
const NO_CLASS: i32 = i32::MAX;

/// Weight tables indexed by level (homogeneous) or by dense node index.
struct Tables {
    alpha: Vec<f64>,
    sigma: Vec<f64>,
    sigma_hat: Vec<f64>,
    class: Vec<i32>,
    /// Prefix sums of `alpha^2` from the root, inclusive.
    cum_a2: Vec<f64>,
}

fn build_tables(alpha: Vec<f64>, sigma: Vec<f64>, cum_a2: Vec<f64>) -> Tables {
    let (mut hat, mut class) = (Vec::with_capacity(sigma.len()), Vec::with_capacity(sigma.len()));
    for &s in &sigma {
        if s > 0.0 {
            let k = dyadic_class(s).expect("validated sigma");
            hat.push(pow2(-k));
            class.push(k);
        } else {
            // Mathematically positive but underflowed; scale-rounded terms
            // vanish exactly like the originals.
            hat.push(0.0);
            class.push(NO_CLASS);
        }
    }
    Tables {
        alpha,
        sigma,
        sigma_hat: hat,
        class,
        cum_a2,
    }
}

/// A tree together with bound, validated weights and distance caches.
pub struct WeightedTree<'t> {
    tree: &'t Tree,
    weights: WeightSystem,
    tables: Tables,
    /// Tables indexed by level (`true`) or by dense node index (`false`).
    by_level: bool,
}

impl<'t> WeightedTree<'t> {
    pub fn new(tree: &'t Tree, weights: &WeightSystem) -> Result<WeightedTree<'t>> {
        weights.revalidate()?;
        match weights {
            WeightSystem::Level { alpha, sigma } => {
                let levels = tree.height() as u64 + 1;
                for (name, seq) in [("alpha", alpha), ("sigma", sigma)] {
                    if let Some(limit) = seq.len_limit() {
                        if limit < levels {
                            return Err(Error::InvalidWeights(format!(
                                "{name} table covers {limit} levels, tree has {levels}"
                            )));
                        }
                    }
                }
                let a: Vec<f64> = (0..levels).map(|k| alpha.value(k)).collect();
                let s: Vec<f64> = (0..levels).map(|k| sigma.value(k)).collect();
                let mut cum = Vec::with_capacity(levels as usize);
                let mut acc = 0.0;
                for &x in &a {
                    acc += x * x;
                    cum.push(acc);
                }
                Ok(WeightedTree {
                    tree,
                    weights: weights.clone(),
                    tables: build_tables(a, s, cum),
                    by_level: true,
                })
            }
            WeightSystem::PerNode { alpha, sigma } => {
                if !matches!(tree.kind(), TreeKind::Explicit) {
                    return Err(Error::UnsupportedShape(
                        "per-node weights need an explicit tree".into(),
                    ));
                }
                let n = tree.node_count() as usize;
                if alpha.len() != n {
                    return Err(Error::InvalidWeights(format!(
                        "{} weight entries for {} nodes",
                        alpha.len(),
                        n
                    )));
                }
                // sigma must be non-increasing along every branch.
                for v in tree.nodes() {
                    if let Some(p) = tree.parent(v) {
                        let (sv, sp) = (
                            sigma[tree.dense_index(v) as usize],
                            sigma[tree.dense_index(p) as usize],
                        );
                        if sv > sp {
                            return Err(Error::InvalidWeights(format!(
                                "sigma increases along a branch: {sp} -> {sv}"
                            )));
                        }
                    }
                }
                // Root-first pass fills prefix sums (parents precede children
                // in no particular dense order, so resolve via a stack).
                let mut cum = vec![f64::NAN; n];
                let mut stack = vec![tree.root()];
                while let Some(v) = stack.pop() {
                    let i = tree.dense_index(v) as usize;
                    let base = match tree.parent(v) {
                        Some(p) => cum[tree.dense_index(p) as usize],
                        None => 0.0,
                    };
                    cum[i] = base + alpha[i] * alpha[i];
                    stack.extend(tree.children(v));
                }
                Ok(WeightedTree {
                    tree,
                    weights: weights.clone(),
                    tables: build_tables(alpha.clone(), sigma.clone(), cum),
                    by_level: false,
                })
            }
        }
    }

    pub fn tree(&self) -> &'t Tree {
        self.tree
    }

    pub fn weights(&self) -> &WeightSystem {
        &self.weights
    }

    pub fn is_level(&self) -> bool {
        self.by_level
    }

    #[inline]
    fn idx(&self, t: NodeRef) -> usize {
        if self.by_level {
            self.tree.depth(t) as usize
        } else {
            self.tree.dense_index(t) as usize
        }
    }

    /// `alpha` at a node.
    pub fn alpha(&self, t: NodeRef) -> f64 {
        self.tables.alpha[self.idx(t)]
    }

    /// `sigma` at a node.
    pub fn sigma(&self, t: NodeRef) -> f64 {
        self.tables.sigma[self.idx(t)]
    }

    /// Dyadically rounded scale at a node.
    pub fn sigma_hat(&self, t: NodeRef) -> f64 {
        self.tables.sigma_hat[self.idx(t)]
    }

    /// Dyadic class of a node, if its scale is representable.
    pub fn class(&self, t: NodeRef) -> Option<i32> {
        match self.tables.class[self.idx(t)] {
            NO_CLASS => None,
            k => Some(k),
        }
    }

    /// Branch prefix sum `A(t)` (root inclusive).
    pub fn cum_a2(&self, t: NodeRef) -> f64 {
        self.tables.cum_a2[self.idx(t)]
    }

    /// Level-indexed `(sigma or sigma_hat, cum_a2)` arrays for homogeneous
    /// weights; the entropy sweeps iterate these directly.
    pub(crate) fn level_arrays(&self, hat: bool) -> Option<(&[f64], &[f64])> {
        if self.by_level {
            let s = if hat { &self.tables.sigma_hat } else { &self.tables.sigma };
            Some((s, &self.tables.cum_a2))
        } else {
            None
        }
    }

    /// Distance between comparable nodes `t <= s` under the supremum-form
    /// metric (`hat` selects the rounded scales).
    fn d_comparable(&self, t: NodeRef, s: NodeRef, hat: bool) -> f64 {
        if t == s {
            return 0.0;
        }
        let sig = if hat { &self.tables.sigma_hat } else { &self.tables.sigma };
        let cum = &self.tables.cum_a2;
        if self.by_level {
            let (lt, ls) = (self.tree.depth(t) as usize, self.tree.depth(s) as usize);
            let base = cum[lt];
            let mut best = 0.0f64;
            for l in (lt + 1)..=ls {
                best = best.max(sig[l] * (cum[l] - base).sqrt());
            }
            best
        } else {
            let ti = self.tree.dense_index(t) as usize;
            let base = cum[ti];
            let mut best = 0.0f64;
            let mut cur = s;
            while cur != t {
                let i = self.tree.dense_index(cur) as usize;
                best = best.max(sig[i] * (cum[i] - base).sqrt());
                cur = self.tree.parent(cur).expect("t is an ancestor of s");
            }
            best
        }
    }

    fn d_any(&self, t: NodeRef, s: NodeRef, hat: bool) -> f64 {
        let m = self.tree.meet(t, s);
        if m == t {
            self.d_comparable(t, s, hat)
        } else if m == s {
            self.d_comparable(s, t, hat)
        } else {
            self.d_comparable(m, t, hat) + self.d_comparable(m, s, hat)
        }
    }

    /// Tree metric `d`.
    pub fn dist_d(&self, t: NodeRef, s: NodeRef) -> f64 {
        self.d_any(t, s, false)
    }

    /// Tree metric under dyadically rounded scales.
    pub fn dist_dhat(&self, t: NodeRef, s: NodeRef) -> f64 {
        self.d_any(t, s, true)
    }

    /// Canonical Gaussian metric `(E|X_t - X_s|^2)^(1/2)`.
    pub fn dist_dx(&self, t: NodeRef, s: NodeRef) -> f64 {
        if t == s {
            return 0.0;
        }
        // Fix the summation order so the result is exactly symmetric.
        let (t, s) = if t <= s { (t, s) } else { (s, t) };
        let m = self.tree.meet(t, s);
        let (am, at, as_) = (self.cum_a2(m), self.cum_a2(t), self.cum_a2(s));
        let (st, ss) = (self.sigma(t), self.sigma(s));
        let head = (st - ss) * (st - ss) * am;
        let mid = st * st * (at - am);
        let tail = ss * ss * (as_ - am);
        (head + mid + tail).sqrt()
    }

    pub fn dist(&self, kind: MetricKind, t: NodeRef, s: NodeRef) -> f64 {
        match kind {
            MetricKind::D => self.dist_d(t, s),
            MetricKind::Dx => self.dist_dx(t, s),
            MetricKind::DHat => self.dist_dhat(t, s),
        }
    }

    /// Diameter of a chain under a supremum-form metric, using the bound
    /// `d(t, s) <= d(root, s)` valid on totally ordered trees.
    pub fn chain_diameter(&self, kind: MetricKind) -> Result<f64> {
        if !self.tree.is_chain() || !kind.order_monotone() {
            return Err(Error::UnsupportedShape(
                "closed-form diameter only for supremum metrics on chains".into(),
            ));
        }
        let (sig, cum) = self.level_arrays(kind == MetricKind::DHat).unwrap();
        let base = cum[0];
        let mut best = 0.0f64;
        for l in 1..sig.len() {
            best = best.max(sig[l] * (cum[l] - base).sqrt());
        }
        Ok(best)
    }
}

/// Scale partition of a weighted tree: cell `k` holds the nodes whose scale
/// lies in `(2^(-k-1), 2^(-k)]`.
pub struct LevelPartition {
    /// Class per level (homogeneous) or per dense node index.
    class: Vec<i32>,
    by_level: bool,
    pub k_min: i32,
    pub k_max: i32,
}

impl LevelPartition {
    pub fn new(wt: &WeightedTree) -> Result<LevelPartition> {
        let class = wt.tables.class.clone();
        if class.iter().any(|&k| k == NO_CLASS) {
            return Err(Error::InvalidParameter(
                "scale underflowed to zero; classes are undefined at this depth".into(),
            ));
        }
        let (mut lo, mut hi) = (i32::MAX, i32::MIN);
        for &k in &class {
            lo = lo.min(k);
            hi = hi.max(k);
        }
        Ok(LevelPartition {
            class,
            by_level: wt.by_level,
            k_min: lo,
            k_max: hi,
        })
    }

    pub fn class_of(&self, tree: &Tree, t: NodeRef) -> i32 {
        if self.by_level {
            self.class[tree.depth(t) as usize]
        } else {
            self.class[tree.dense_index(t) as usize]
        }
    }

    /// Structural checks: along every branch the class is non-decreasing
    /// (each cell meets each branch in one order interval, cells appear in
    /// increasing class order), and no class precedes the root's.
    pub fn check_branch_structure(&self, tree: &Tree) -> bool {
        let root_class = self.class_of(tree, tree.root());
        for v in tree.nodes() {
            if let Some(p) = tree.parent(v) {
                if self.class_of(tree, v) < self.class_of(tree, p) {
                    return false;
                }
            }
            if self.class_of(tree, v) < root_class {
                return false;
            }
        }
        true
    }
}

/// Result of the exhaustive axiom scan.
#[derive(Clone, Debug)]
pub struct AxiomReport {
    pub nodes: u64,
    pub symmetric: bool,
    pub identity_ok: bool,
    /// Distinct pairs at distance zero (degenerate weights make the
    /// "metric" a pseudometric; that is reported, not an error).
    pub zero_distinct_pairs: u64,
    /// Largest `d(i,j) - d(i,k) - d(k,j)` over all triples, relative to the
    /// pair distance (nonpositive when the triangle inequality holds).
    pub max_triangle_excess: f64,
}

impl AxiomReport {
    pub fn is_metric(&self, tol: f64) -> bool {
        self.symmetric
            && self.identity_ok
            && self.zero_distinct_pairs == 0
            && self.max_triangle_excess <= tol
    }

    pub fn is_pseudometric(&self, tol: f64) -> bool {
        self.symmetric && self.identity_ok && self.max_triangle_excess <= tol
    }
}

/// Exhaustive symmetry/identity/triangle scan over all node triples.
/// Cost is cubic in the node count.
pub fn check_metric_axioms(wt: &WeightedTree, kind: MetricKind) -> AxiomReport {
    let tree = wt.tree();
    let n = tree.node_count() as usize;
    let nodes: Vec<NodeRef> = tree.nodes().collect();
    let mut dist = vec![0.0f64; n * n];
    let mut symmetric = true;
    let mut identity_ok = true;
    let mut zero_pairs = 0u64;
    for i in 0..n {
        for j in i..n {
            let dij = wt.dist(kind, nodes[i], nodes[j]);
            let dji = wt.dist(kind, nodes[j], nodes[i]);
            if dij != dji {
                symmetric = false;
            }
            if i == j && dij != 0.0 {
                identity_ok = false;
            }
            if i != j && dij == 0.0 {
                zero_pairs += 1;
            }
            dist[i * n + j] = dij;
            dist[j * n + i] = dij;
        }
    }
    let mut excess = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            let dij = dist[i * n + j];
            for k in 0..n {
                let slack = dij - dist[i * n + k] - dist[k * n + j];
                if slack > 0.0 {
                    excess = excess.max(slack / dij.max(f64::MIN_POSITIVE));
                } else {
                    excess = excess.max(0.0);
                }
            }
        }
    }
    AxiomReport {
        nodes: n as u64,
        symmetric,
        identity_ok,
        zero_distinct_pairs: zero_pairs,
        max_triangle_excess: excess,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::random_weighted;
    use crate::tree::NodeDoc;
    use crate::weights::LevelSeq;
    use proptest::prelude::*;

    fn unit_weights() -> WeightSystem {
        WeightSystem::level(
            LevelSeq::Constant { c: 1.0 },
            LevelSeq::Constant { c: 1.0 },
        )
        .unwrap()
    }

    #[test]
    fn unit_chain_distances() {
        let t = Tree::chain(10);
        let w = unit_weights();
        let wt = WeightedTree::new(&t, &w).unwrap();
        let n = |k| t.chain_node(k).unwrap();
        assert_eq!(wt.dist_d(n(0), n(4)), 2.0);
        assert_eq!(wt.dist_d(n(4), n(0)), 2.0);
        assert_eq!(wt.dist_d(n(3), n(3)), 0.0);
        assert!((wt.dist_d(n(1), n(4)) - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(wt.dist_dx(n(0), n(4)), 2.0);
        // Equal scales: dhat rounds sigma = 1 to 1, so dhat = d.
        assert_eq!(wt.dist_dhat(n(0), n(4)), 2.0);
        assert_eq!(wt.chain_diameter(MetricKind::D).unwrap(), 10f64.sqrt());
    }

    #[test]
    fn geometric_scale_chain_pins_d_at_one_half() {
        // sigma(k) = 2^-k, alpha(0) = 0, alpha(k) = 1/k: the supremum in d
        // from the root is always attained at the first step.
        let t = Tree::chain(400);
        let w = WeightSystem::level(
            LevelSeq::PowerK { gamma: 1.0, at0: 0.0 },
            LevelSeq::Geometric { q: 0.5 },
        )
        .unwrap();
        let wt = WeightedTree::new(&t, &w).unwrap();
        let root = t.root();
        for k in 1..=400u32 {
            let s = t.chain_node(k).unwrap();
            assert_eq!(wt.dist_d(root, s), 0.5, "k = {k}");
        }
        // dX instead collapses: truncated tail of sum v^-2 under 2^-k.
        let d1 = wt.dist_dx(root, t.chain_node(1).unwrap());
        assert!((d1 - 0.5).abs() < 1e-15);
        let d2 = wt.dist_dx(root, t.chain_node(2).unwrap());
        assert!((d2 - 0.25 * 1.25f64.sqrt()).abs() < 1e-15);
        let d14 = wt.dist_dx(root, t.chain_node(14).unwrap());
        assert!(d14 < 1e-3 && d14 > 0.0);
    }

    #[test]
    fn dyadic_rounding_matches_frozen_cases() {
        assert_eq!(sigma_hat(0.3).unwrap(), 0.5);
        assert_eq!(dyadic_class(0.3).unwrap(), 1);
        assert_eq!(sigma_hat(1.0).unwrap(), 1.0);
        assert_eq!(sigma_hat(0.25).unwrap(), 0.25);
        assert_eq!(dyadic_class(0.25).unwrap(), 2);
        assert_eq!(sigma_hat(0.7).unwrap(), 1.0);
        assert_eq!(sigma_hat(4.0).unwrap(), 4.0);
        assert_eq!(dyadic_class(4.0).unwrap(), -2);
        // Just above a dyadic point rounds up to the next cell.
        assert_eq!(sigma_hat(0.25 + 1e-12).unwrap(), 0.5);
        // Subnormal scales still classify exactly.
        let tiny = f64::from_bits(3); // 3 * 2^-1074
        let k = dyadic_class(tiny).unwrap();
        assert!(pow2(-k) >= tiny && tiny > pow2(-k - 1));
        assert!(dyadic_class(0.0).is_err());
    }

    #[test]
    fn d_ignores_root_alpha_dx_does_not() {
        let t = Tree::chain(6);
        let mk = |a0: f64| {
            WeightSystem::level(
                LevelSeq::Array {
                    values: vec![a0, 1.0, 0.5, 0.25, 1.0, 0.125, 2.0],
                },
                LevelSeq::Array {
                    values: vec![1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4],
                },
            )
            .unwrap()
        };
        let (w0, w9) = (mk(0.0), mk(9.0));
        let wt0 = WeightedTree::new(&t, &w0).unwrap();
        let wt9 = WeightedTree::new(&t, &w9).unwrap();
        for i in 0..=6u32 {
            for j in 0..=6u32 {
                let (a, b) = (t.chain_node(i).unwrap(), t.chain_node(j).unwrap());
                assert_eq!(wt0.dist_d(a, b), wt9.dist_d(a, b));
            }
        }
        let (r, s) = (t.chain_node(1).unwrap(), t.chain_node(3).unwrap());
        assert!(wt9.dist_dx(r, s) > wt0.dist_dx(r, s));
    }

    #[test]
    fn per_node_weights_bind_and_validate() {
        let docs: Vec<NodeDoc> = vec![
            NodeDoc { id: 0, parent: None },
            NodeDoc { id: 1, parent: Some(0) },
            NodeDoc { id: 2, parent: Some(0) },
            NodeDoc { id: 3, parent: Some(1) },
        ];
        let t = Tree::from_node_docs(&docs).unwrap();
        let w = WeightSystem::per_node(vec![0.0, 1.0, 2.0, 1.0], vec![1.0, 0.5, 1.0, 0.25]).unwrap();
        let wt = WeightedTree::new(&t, &w).unwrap();
        let n = |i: u64| t.node_at(i);
        // d(1, 3) = sigma(3) * |alpha(3)| on the one-step path.
        assert_eq!(wt.dist_d(n(1), n(3)), 0.25);
        // Incomparable pair goes through the root.
        let expect = 0.5 * 1.0 + 1.0 * 2.0;
        assert_eq!(wt.dist_d(n(1), n(2)), expect);

        // Branch monotonicity violation: sigma jumps up below node 1.
        let bad = WeightSystem::per_node(vec![0.0, 1.0, 2.0, 1.0], vec![1.0, 0.5, 1.0, 0.75]).unwrap();
        assert!(WeightedTree::new(&t, &bad).is_err());
        // Per-node weights refuse implicit trees.
        let chain = Tree::chain(3);
        assert!(WeightedTree::new(&chain, &w).is_err());
    }

    #[test]
    fn partition_classes_step_down_branches() {
        let t = Tree::chain(6);
        let w = WeightSystem::level(
            LevelSeq::Constant { c: 1.0 },
            LevelSeq::Array {
                values: vec![1.0, 0.8, 0.5, 0.3, 0.3, 0.2, 0.06],
            },
        )
        .unwrap();
        let wt = WeightedTree::new(&t, &w).unwrap();
        let p = LevelPartition::new(&wt).unwrap();
        let classes: Vec<i32> = (0..=6u32)
            .map(|k| p.class_of(&t, t.chain_node(k).unwrap()))
            .collect();
        assert_eq!(classes, vec![0, 0, 1, 1, 1, 2, 4]);
        assert_eq!((p.k_min, p.k_max), (0, 4));
        assert!(p.check_branch_structure(&t));
        // Sandwich: sigma <= sigma_hat < 2 sigma.
        for k in 0..=6u32 {
            let n = t.chain_node(k).unwrap();
            assert!(wt.sigma(n) <= wt.sigma_hat(n) && wt.sigma_hat(n) < 2.0 * wt.sigma(n));
        }
    }

    #[test]
    fn axiom_scan_flags_degenerate_weights() {
        let t = Tree::chain(5);
        let zero = WeightSystem::level(
            LevelSeq::Constant { c: 0.0 },
            LevelSeq::Constant { c: 1.0 },
        )
        .unwrap();
        let wt = WeightedTree::new(&t, &zero).unwrap();
        let rep = check_metric_axioms(&wt, MetricKind::D);
        assert!(rep.is_pseudometric(1e-9));
        assert!(!rep.is_metric(1e-9));
        assert_eq!(rep.zero_distinct_pairs, 15);
    }

    /// Field covariance from first principles: `sigma(t) sigma(s)` times the
    /// sum of `alpha^2` over the common ancestor set.
    fn covariance_oracle(t: &Tree, wt: &WeightedTree, a: NodeRef, b: NodeRef) -> f64 {
        let anc_a = t.ancestors(a);
        let anc_b: std::collections::HashSet<NodeRef> = t.ancestors(b).into_iter().collect();
        let shared: f64 = anc_a
            .iter()
            .filter(|v| anc_b.contains(v))
            .map(|&v| wt.alpha(v) * wt.alpha(v))
            .sum();
        wt.sigma(a) * wt.sigma(b) * shared
    }

    #[test]
    fn dx_matches_covariance_oracle() {
        for seed in [3u64, 17, 4242] {
            let (t, w) = random_weighted(seed, 60);
            let wt = WeightedTree::new(&t, &w).unwrap();
            let nodes: Vec<NodeRef> = t.nodes().collect();
            for &a in &nodes {
                for &b in &nodes {
                    let raa = covariance_oracle(&t, &wt, a, a);
                    let rbb = covariance_oracle(&t, &wt, b, b);
                    let rab = covariance_oracle(&t, &wt, a, b);
                    let oracle = (raa + rbb - 2.0 * rab).max(0.0).sqrt();
                    let got = wt.dist_dx(a, b);
                    assert!(
                        (got - oracle).abs() <= 1e-9 * (1.0 + oracle),
                        "seed {seed}: dx {got} vs oracle {oracle}"
                    );
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn supremum_metrics_sandwich_and_axioms(seed in 0u64..10_000) {
            let (t, w) = random_weighted(seed, 40);
            let wt = WeightedTree::new(&t, &w).unwrap();
            let nodes: Vec<NodeRef> = t.nodes().collect();
            for &a in &nodes {
                for &b in &nodes {
                    let d = wt.dist_d(a, b);
                    let dh = wt.dist_dhat(a, b);
                    prop_assert!(d <= dh * (1.0 + 1e-12) && dh <= 2.0 * d * (1.0 + 1e-12) + 0.0,
                        "sandwich failed: d={d} dhat={dh}");
                }
            }
            for kind in [MetricKind::D, MetricKind::Dx, MetricKind::DHat] {
                let rep = check_metric_axioms(&wt, kind);
                prop_assert!(rep.is_pseudometric(1e-9), "{:?}: {rep:?}", kind);
            }
            let p = LevelPartition::new(&wt).unwrap();
            prop_assert!(p.check_branch_structure(&t));
        }
    }
}

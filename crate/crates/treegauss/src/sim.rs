//! Sampling the field and its rescaled and localized companions, Monte
//! Carlo estimation of `E sup |X_t|`, and the classical Gaussian bounds
//! used to sanity-check the estimates.
//!
//! Randomness is counter-based (see [`crate::rng`]): the normal at a node
//! is a pure function of (master seed, replica index, root-to-node child
//! path). Consequences relied on throughout:
//!
//! * replicas parallelize with bit-identical results for any worker count,
//! * deepening a truncation extends a sample instead of resampling it, so
//!   per-seed suprema are non-decreasing in depth,
//! * the localized and rescaled fields share the draws of the plain field,
//!   making the decomposition identities checkable pathwise.

use crate::metrics::{LevelPartition, WeightedTree};
use crate::rng::{child_key, replica_stream, standard_normal, ROOT_KEY};
use crate::tree::{Tree, TreeKind, TreeSpec};
use crate::weights::{logsumexp_stream, WeightSystem};
use crate::{Error, NodeRef, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Default depth budget for streaming binary-tree replicas (about 3e7 node
/// visits per replica at the cap).
pub const BINARY_SIM_DEPTH_CAP: u32 = 24;

/// Per-node explicit-tree budget for the decomposition checks.
pub const DECOMPOSITION_NODE_CAP: u64 = 10_000;

/// `E max(xi_1, xi_2)` for independent standard normals: `1 / sqrt(pi)`.
pub const EMAX_TWO_NORMALS: f64 = 0.564_189_583_547_756_3;

/// Lower bound for the expected maximum of `n` independent centered
/// normals whose standard deviations are all at least `sigma_min`.
pub fn independent_max_lower(n: u64, sigma_min: f64) -> f64 {
    0.64 * ((n as f64).ln()).sqrt() * sigma_min
}

/// Upper bound for the expected maximum of any `n` centered normals whose
/// standard deviations are all at most `sigma_max` (no independence used).
pub fn max_upper(n: u64, sigma_max: f64) -> f64 {
    (2.0 * (n as f64).ln()).sqrt() * sigma_max
}

/// Gaussian concentration tail for the supremum around its mean:
/// `P(S > E S + r) <= exp(-r^2 / (2 sigma2^2))` with `sigma2` the largest
/// pointwise standard deviation.
pub fn gaussian_tail_bound(r: f64, sigma2: f64) -> f64 {
    (-r * r / (2.0 * sigma2 * sigma2)).exp()
}

/// What a replica reports.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    /// `sup over all nodes of |X_t|`.
    SupAbs,
    /// `max over nodes strictly below the root of X_t` (signed); the
    /// independent-maxima calibration statistic on star trees.
    MaxBelowRoot,
}

impl Default for Statistic {
    fn default() -> Self {
        Statistic::SupAbs
    }
}

/// One Monte Carlo experiment: tree family, weights, replication.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimConfig {
    pub tree: TreeSpec,
    pub weights: WeightSystem,
    pub replicas: u64,
    pub seed: u64,
    /// Truncation depths for growth studies (chain and binary trees);
    /// empty means "use the tree spec as given".
    #[serde(default)]
    pub depths: Vec<u32>,
    #[serde(default)]
    pub statistic: Statistic,
    /// Keep per-replica raw values in the estimate.
    #[serde(default)]
    pub keep_raw: bool,
}

/// Mean and spread of the statistic at one truncation.
#[derive(Clone, Debug, Serialize)]
pub struct DepthEstimate {
    /// Tree height used for this row.
    pub depth: u32,
    pub mean: f64,
    /// Sample standard deviation over sqrt(replicas).
    pub stderr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw: Option<Vec<f64>>,
}

/// Monte Carlo result over the configured depth list.
#[derive(Clone, Debug, Serialize)]
pub struct SimEstimate {
    pub rows: Vec<DepthEstimate>,
    pub replicas: u64,
    pub seed: u64,
    pub statistic: Statistic,
}

/// Everything one traversal of one replica produces.
struct ReplicaSample {
    sup_abs: f64,
    /// (depth, preorder rank) of the attaining node, for tie-breaking.
    arg_rank: (u32, u64),
    arg: NodeRef,
    max_below_root: f64,
    has_below_root: bool,
}

impl ReplicaSample {
    fn new(root: NodeRef) -> ReplicaSample {
        ReplicaSample {
            sup_abs: f64::NEG_INFINITY,
            arg_rank: (u32::MAX, u64::MAX),
            arg: root,
            max_below_root: f64::NEG_INFINITY,
            has_below_root: false,
        }
    }

    /// Fold in one node value. Visit order must be preorder with children
    /// in slot order; ties prefer smaller depth, then earlier visit.
    fn visit(&mut self, node: NodeRef, depth: u32, rank: u64, x: f64) {
        let a = x.abs();
        if a > self.sup_abs || (a == self.sup_abs && (depth, rank) < self.arg_rank) {
            self.sup_abs = a;
            self.arg_rank = (depth, rank);
            self.arg = node;
        }
        if depth > 0 {
            self.has_below_root = true;
            if x > self.max_below_root {
                self.max_below_root = x;
            }
        }
    }

    fn statistic(&self, which: Statistic) -> Result<f64> {
        match which {
            Statistic::SupAbs => Ok(self.sup_abs),
            Statistic::MaxBelowRoot => {
                if self.has_below_root {
                    Ok(self.max_below_root)
                } else {
                    Err(Error::InvalidParameter(
                        "signed-max statistic needs a node below the root".into(),
                    ))
                }
            }
        }
    }
}

/// Walk every node once in preorder, accumulating the alpha-weighted
/// normal sum along the path and scoring `X = sigma * S` at each node.
fn run_replica(wt: &WeightedTree, stream: u64) -> Result<ReplicaSample> {
    let tree = wt.tree();
    let root = tree.root();
    let mut acc = ReplicaSample::new(root);
    let mut rank = 0u64;
    match tree.kind() {
        TreeKind::Chain { depth } => {
            let mut key = ROOT_KEY;
            let mut s = 0.0f64;
            for level in 0..=depth {
                if level > 0 {
                    key = child_key(key, 0);
                }
                let node = tree.node_at(level as u64);
                s += wt.alpha(node) * standard_normal(stream, key);
                acc.visit(node, level, rank, wt.sigma(node) * s);
                rank += 1;
            }
        }
        TreeKind::Binary { depth } => {
            if depth > BINARY_SIM_DEPTH_CAP {
                return Err(Error::DepthCap {
                    op: "sample_sup",
                    depth,
                    cap: BINARY_SIM_DEPTH_CAP,
                });
            }
            // (heap code, level, key, partial sum); right child pushed
            // first so the left one pops first (preorder).
            let mut stack: Vec<(u64, u32, u64, f64)> = vec![(1, 0, ROOT_KEY, 0.0)];
            while let Some((code, level, key, s0)) = stack.pop() {
                let node = tree.node_at(code - 1);
                let s = s0 + wt.alpha(node) * standard_normal(stream, key);
                acc.visit(node, level, rank, wt.sigma(node) * s);
                rank += 1;
                if level < depth {
                    stack.push((2 * code + 1, level + 1, child_key(key, 1), s));
                    stack.push((2 * code, level + 1, child_key(key, 0), s));
                }
            }
        }
        TreeKind::Explicit => {
            let mut stack: Vec<(NodeRef, u64, f64)> = vec![(root, ROOT_KEY, 0.0)];
            while let Some((node, key, s0)) = stack.pop() {
                let s = s0 + wt.alpha(node) * standard_normal(stream, key);
                acc.visit(node, tree.depth(node), rank, wt.sigma(node) * s);
                rank += 1;
                let kids = tree.children(node);
                for (slot, c) in kids.into_iter().enumerate().rev() {
                    stack.push((c, child_key(key, slot as u64), s));
                }
            }
        }
    }
    Ok(acc)
}

/// One draw of `sup |X_t|` with its attaining node (ties: smaller depth,
/// then earlier preorder position). `stream` is the per-replica stream
/// from [`crate::rng::replica_stream`].
pub fn sample_sup(tree: &Tree, w: &WeightSystem, stream: u64) -> Result<(f64, NodeRef)> {
    let wt = WeightedTree::new(tree, w)?;
    let acc = run_replica(&wt, stream)?;
    Ok((acc.sup_abs, acc.arg))
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo estimate of the expected statistic at each configured
/// truncation depth. Deterministic in (config, seed): replicas fold in
/// index order whatever the worker count.
pub fn estimate_esup(config: &SimConfig) -> Result<SimEstimate> {
    if config.replicas == 0 {
        return Err(Error::InvalidParameter("need at least one replica".into()));
    }
    let specs: Vec<TreeSpec> = if config.depths.is_empty() {
        vec![config.tree.clone()]
    } else {
        config
            .depths
            .iter()
            .map(|&d| match &config.tree {
                TreeSpec::Chain { .. } => Ok(TreeSpec::Chain { depth: d }),
                TreeSpec::Binary { .. } => Ok(TreeSpec::Binary { depth: d }),
                _ => Err(Error::InvalidParameter(
                    "depth sweeps need a chain or binary tree".into(),
                )),
            })
            .collect::<Result<_>>()?
    };
    let mut rows = Vec::with_capacity(specs.len());
    for spec in &specs {
        let tree = spec.build()?;
        let wt = WeightedTree::new(&tree, &config.weights)?;
        let values: Vec<f64> = (0..config.replicas)
            .into_par_iter()
            .map(|r| {
                run_replica(&wt, replica_stream(config.seed, r))?
                    .statistic(config.statistic)
            })
            .collect::<Result<_>>()?;
        let (mean, stderr) = mean_stderr(&values);
        rows.push(DepthEstimate {
            depth: tree.height(),
            mean,
            stderr,
            raw: config.keep_raw.then_some(values),
        });
    }
    Ok(SimEstimate {
        rows,
        replicas: config.replicas,
        seed: config.seed,
        statistic: config.statistic,
    })
}

/// Per-node values of the three coupled fields from one replica stream:
/// plain `X`, dyadically rescaled `X^` (and its localization `Y^`), and
/// the localization `Y` of the plain field. Indexed by dense node index.
pub struct CoupledFields {
    pub x: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub y: Vec<f64>,
    pub y_hat: Vec<f64>,
}

fn coupled_fields(wt: &WeightedTree, stream: u64) -> Result<CoupledFields> {
    let tree = wt.tree();
    if !matches!(tree.kind(), TreeKind::Explicit) {
        return Err(Error::UnsupportedShape(
            "field tables need an explicit tree".into(),
        ));
    }
    let n = tree.node_count();
    if n > DECOMPOSITION_NODE_CAP {
        return Err(Error::TooLarge {
            op: "coupled_fields",
            nodes: n,
            limit: DECOMPOSITION_NODE_CAP,
        });
    }
    // Classes must exist everywhere for the localized fields.
    LevelPartition::new(wt)?;
    let n = n as usize;
    let (mut x, mut x_hat, mut y, mut y_hat) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    // DFS carrying (node, key, sum at parent, sum at entry into the
    // node's class segment).
    let root = tree.root();
    let mut stack: Vec<(NodeRef, u64, f64, f64)> = vec![(root, ROOT_KEY, 0.0, 0.0)];
    while let Some((node, key, s0, entry0)) = stack.pop() {
        let s = s0 + wt.alpha(node) * standard_normal(stream, key);
        let entry = match tree.parent(node) {
            Some(p) if wt.class(p) == wt.class(node) => entry0,
            _ => s0,
        };
        let i = tree.dense_index(node) as usize;
        x[i] = wt.sigma(node) * s;
        x_hat[i] = wt.sigma_hat(node) * s;
        y[i] = wt.sigma(node) * (s - entry);
        y_hat[i] = wt.sigma_hat(node) * (s - entry);
        for (slot, c) in tree.children(node).into_iter().enumerate().rev() {
            stack.push((c, child_key(key, slot as u64), s, entry));
        }
    }
    Ok(CoupledFields { x, x_hat, y, y_hat })
}

/// Localized field `Y_t = sigma(t) * sum over ancestors v of t in the same
/// scale class of alpha(v) xi_v`, sharing draws with [`sample_sup`] at the
/// same stream. Indexed by dense node index.
pub fn sample_localized(tree: &Tree, w: &WeightSystem, stream: u64) -> Result<Vec<f64>> {
    let wt = WeightedTree::new(tree, w)?;
    Ok(coupled_fields(&wt, stream)?.y)
}

/// Worst-case defects of the coupling identities in one replica.
#[derive(Clone, Copy, Debug)]
pub struct DecompositionResiduals {
    /// `X^_t - sum over classes l of 2^-(k-l) Y^_(lambda_l(t))`, relative.
    pub y_to_x: f64,
    /// `Y_t - (X_t - sigma(t)/sigma(back(t)) X_back(t))`, relative, where
    /// `back(t)` is the deepest ancestor outside `t`'s scale class.
    pub x_to_y: f64,
    /// Positive part of the worst violation of
    /// `|X_t| <= |X^_t| <= 2 |X_t|`, relative.
    pub sandwich: f64,
}

/// Evaluate the localization and rescaling identities pathwise on one
/// replica of an explicit tree. All three numbers are floating-point noise
/// (about 1e-15) when the implementation is consistent.
pub fn decomposition_residuals(
    tree: &Tree,
    w: &WeightSystem,
    stream: u64,
) -> Result<DecompositionResiduals> {
    let wt = WeightedTree::new(tree, w)?;
    let fields = coupled_fields(&wt, stream)?;
    let part = LevelPartition::new(&wt)?;
    let k_min = part.k_min;
    let span = (part.k_max - k_min + 1) as usize;

    let mut worst = DecompositionResiduals {
        y_to_x: 0.0,
        x_to_y: 0.0,
        sandwich: 0.0,
    };
    // DFS with a stack per scale class holding the deepest path node of
    // that class and its Y^ value; `back` is the deepest path node whose
    // class differs from the current node's.
    struct Frame {
        node: NodeRef,
        children_left: Vec<NodeRef>,
        class_slot: usize,
        had_prev: Option<(NodeRef, f64)>,
        back_prev: Option<NodeRef>,
    }
    let root = tree.root();
    let mut per_class: Vec<Option<(NodeRef, f64)>> = vec![None; span];
    let mut back: Option<NodeRef> = None;
    let mut frames: Vec<Frame> = Vec::new();
    let open = |node: NodeRef,
                    per_class: &mut Vec<Option<(NodeRef, f64)>>,
                    back: &mut Option<NodeRef>,
                    frames: &mut Vec<Frame>| {
        let i = tree.dense_index(node) as usize;
        let k = wt.class(node).expect("partition built") as i64;
        let slot = (k - k_min as i64) as usize;
        let had_prev = per_class[slot];
        per_class[slot] = Some((node, fields.y_hat[i]));
        let back_prev = *back;
        if let Some(p) = tree.parent(node) {
            if wt.class(p) != wt.class(node) {
                *back = Some(p);
            }
        }
        let mut kids = tree.children(node);
        kids.reverse();
        frames.push(Frame {
            node,
            children_left: kids,
            class_slot: slot,
            had_prev,
            back_prev,
        });
    };
    open(root, &mut per_class, &mut back, &mut frames);
    while let Some(top) = frames.last_mut() {
        let node = top.node;
        if let Some(c) = top.children_left.pop() {
            open(c, &mut per_class, &mut back, &mut frames);
            continue;
        }
        // Leave `node`: score its residuals, restore the path state.
        let i = tree.dense_index(node) as usize;
        let k = wt.class(node).expect("partition built");
        // Rescaled field reassembled from per-class localizations.
        let mut sum = 0.0f64;
        for (slot, entry) in per_class.iter().enumerate() {
            if let Some((_, yh)) = entry {
                let l = k_min + slot as i32;
                if l <= k {
                    sum += crate::metrics::pow2(l - k) * yh;
                }
            }
        }
        let scale = fields.x_hat[i].abs().max(1.0);
        worst.y_to_x = worst.y_to_x.max((fields.x_hat[i] - sum).abs() / scale);
        if let Some(b) = back {
            let bi = tree.dense_index(b) as usize;
            let predicted = fields.x[i] - wt.sigma(node) / wt.sigma(b) * fields.x[bi];
            let scale = fields.x[i].abs().max(1.0);
            worst.x_to_y = worst.x_to_y.max((fields.y[i] - predicted).abs() / scale);
        }
        let (ax, ahat) = (fields.x[i].abs(), fields.x_hat[i].abs());
        let viol = (ax - ahat).max(ahat - 2.0 * ax) / ax.max(1.0);
        worst.sandwich = worst.sandwich.max(viol);

        let top = frames.pop().unwrap();
        per_class[top.class_slot] = top.had_prev;
        back = top.back_prev;
    }
    Ok(worst)
}

/// Follow the offspring with the larger normal down a binary tree,
/// recording `max over n of sigma_n * (running alpha-weighted sum of the
/// stepwise maxima)`. A pathwise lower bound for `sup X` under the same
/// stream, with per-step gain `E max(xi,xi') = 1/sqrt(pi)`.
pub fn greedy_branch_statistic(tree: &Tree, w: &WeightSystem, stream: u64) -> Result<f64> {
    let depth = match tree.kind() {
        TreeKind::Binary { depth } => depth,
        _ => {
            return Err(Error::UnsupportedShape(
                "greedy branch statistic needs a binary tree".into(),
            ))
        }
    };
    let (alpha, sigma) = match w {
        WeightSystem::Level { alpha, sigma } => (alpha, sigma),
        WeightSystem::PerNode { .. } => {
            return Err(Error::NotHomogeneous(
                "greedy branch statistic needs level weights".into(),
            ))
        }
    };
    w.revalidate()?;
    let mut key = ROOT_KEY;
    let mut s = alpha.value(0) * standard_normal(stream, key);
    let mut best = sigma.value(0) * s;
    for level in 1..=depth as u64 {
        let (k0, k1) = (child_key(key, 0), child_key(key, 1));
        let (x0, x1) = (standard_normal(stream, k0), standard_normal(stream, k1));
        let (zeta, next) = if x0 >= x1 { (x0, k0) } else { (x1, k1) };
        key = next;
        s += alpha.value(level) * zeta;
        best = best.max(sigma.value(level) * s);
    }
    Ok(best)
}

/// Analytic lower bound fed by one level band of a binary tree:
/// `0.64 sqrt(log 2) * sqrt(m) * sigma_n * (sum over k in [m, n] of
/// alpha_k^2)^(1/2)` is at most `2 E sup |X|`. Evaluated in log space so
/// fast-growing weights cannot overflow.
pub fn level_increment_lower_bound(w: &WeightSystem, m: u64, n: u64) -> Result<f64> {
    if m > n {
        return Err(Error::InvalidParameter(format!(
            "level band needs m <= n, got [{m}, {n}]"
        )));
    }
    let (alpha, sigma) = w.level_seqs()?;
    if m == 0 {
        return Ok(0.0);
    }
    let ln_energy = logsumexp_stream((m..=n).map(|k| 2.0 * alpha.ln_value(k)));
    let c = 0.64 * 2f64.ln().sqrt();
    let ln_val = c.ln() + 0.5 * (m as f64).ln() + sigma.ln_value(n) + 0.5 * ln_energy;
    Ok(ln_val.exp())
}

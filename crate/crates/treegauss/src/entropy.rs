//! Covering numbers, order covering numbers, packing certificates, the
//! disjoint order-interval packing, and the two entropy functionals that
//! decide boundedness from a covering curve.
//!
//! All balls are OPEN: `B_eps(t) = { s : rho(t, s) < eps }`. Every reported
//! number is certified from one side:
//!
//! * `upper_bound` is the size of an explicitly constructed cover,
//! * `lower_bound` is the size of a `2 eps`-separated set (two points of
//!   which can never share an open `eps`-ball),
//! * `exact` is attached where a provably minimal cover is computable: by
//!   interval sweep on chains under branch-monotone metrics, or by
//!   exhaustive set cover on tiny trees.
//!
//! On totally ordered trees with a branch-monotone metric every ball is a
//! contiguous run of levels whose endpoints move monotonically with the
//! center, so the classical interval-cover greedy returns the minimum.

use crate::metrics::{MetricKind, WeightedTree};
use crate::tree::TreeKind;
use crate::{Error, NodeRef, Result};
use rayon::prelude::*;

/// Node-count ceiling for the generic (quadratic-ish) cover and packing
/// routines.
pub const GENERIC_NODE_CAP: u64 = 1 << 17;
/// Node-count ceiling for the exact interval-packing dynamic program on
/// explicit trees (cubic worst case on path-shaped inputs).
pub const PACKING_NODE_CAP: u64 = 512;
/// Node-count ceiling for exhaustive exact set cover.
pub const EXACT_COVER_CAP: u64 = 15;

fn check_eps(eps: f64) -> Result<()> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "radius must be positive and finite, got {eps}"
        )));
    }
    Ok(())
}

fn check_generic_size(wt: &WeightedTree, op: &'static str) -> Result<()> {
    let n = wt.tree().node_count();
    if n > GENERIC_NODE_CAP {
        return Err(Error::TooLarge {
            op,
            nodes: n,
            limit: GENERIC_NODE_CAP,
        });
    }
    Ok(())
}

/// True when the chain fast paths apply: totally ordered tree, level
/// weights, and a metric whose balls are contiguous level runs.
fn chain_fast_path(wt: &WeightedTree, kind: MetricKind) -> bool {
    wt.tree().is_chain() && wt.is_level() && kind.order_monotone()
}

/// Certified covering bounds at one radius.
#[derive(Clone, Debug)]
pub struct CoverResult {
    pub epsilon: f64,
    /// Size of a `2 epsilon`-separated witness set.
    pub lower_bound: u64,
    /// Size of the constructed open-ball cover.
    pub upper_bound: u64,
    /// Provably minimal cover size, when computable.
    pub exact: Option<u64>,
    /// Centers of the constructed cover.
    pub net: Vec<NodeRef>,
    /// The separated witness points behind `lower_bound`.
    pub packing: Vec<NodeRef>,
}

/// Covering bounds along a strictly decreasing radius grid.
#[derive(Clone, Debug)]
pub struct EntropyCurve {
    pub metric: MetricKind,
    pub points: Vec<CoverResult>,
}

/// Exact minimal cover of a chain by open balls of a branch-monotone
/// metric: repeatedly center on the deepest node still covering the first
/// uncovered level. Returns the centers (levels).
fn chain_sweep_cover(sig: &[f64], cum: &[f64], eps: f64) -> Vec<usize> {
    let n = sig.len();
    let mut centers = Vec::new();
    let mut first_uncovered = 0usize;
    while first_uncovered < n {
        // Deepest center c >= u with d(u, c) < eps; running max over (u, c].
        let u = first_uncovered;
        let mut c = u;
        let mut run = 0.0f64;
        while c + 1 < n {
            let next = run.max(sig[c + 1] * (cum[c + 1] - cum[u]).sqrt());
            if next < eps {
                run = next;
                c += 1;
            } else {
                break;
            }
        }
        centers.push(c);
        // First level below c outside the ball around c.
        let mut s = c;
        let mut run = 0.0f64;
        loop {
            if s + 1 >= n {
                s = n;
                break;
            }
            let next = run.max(sig[s + 1] * (cum[s + 1] - cum[c]).sqrt());
            if next < eps {
                run = next;
                s += 1;
            } else {
                s += 1;
                break;
            }
        }
        first_uncovered = s;
    }
    centers
}

/// Maximal `eps`-separated set of levels on a chain under a branch-monotone
/// metric, greedily from the root. The nearest kept point of any candidate
/// is always the deepest kept one, so a single running maximum suffices.
fn chain_sweep_packing(sig: &[f64], cum: &[f64], eps: f64) -> Vec<usize> {
    let n = sig.len();
    let mut kept = vec![0usize];
    let mut last = 0usize;
    let mut run = 0.0f64;
    for s in 1..n {
        run = run.max(sig[s] * (cum[s] - cum[last]).sqrt());
        if run >= eps {
            kept.push(s);
            last = s;
            run = 0.0;
        }
    }
    kept
}

/// Farthest-point (Gonzalez) cover: grow centers at the point farthest from
/// the current set until every point is strictly within `eps`. The centers
/// are pairwise `>= eps` apart and cover with open balls.
pub fn greedy_ball_cover_witness(
    wt: &WeightedTree,
    kind: MetricKind,
    eps: f64,
) -> Result<Vec<NodeRef>> {
    check_eps(eps)?;
    check_generic_size(wt, "greedy_ball_cover")?;
    let tree = wt.tree();
    let nodes: Vec<NodeRef> = tree.nodes().collect();
    let mut centers = vec![tree.root()];
    let mut min_d: Vec<f64> = nodes.iter().map(|&v| wt.dist(kind, tree.root(), v)).collect();
    loop {
        let (mut far_i, mut far_d) = (0usize, f64::NEG_INFINITY);
        for (i, &d) in min_d.iter().enumerate() {
            if d > far_d {
                far_d = d;
                far_i = i;
            }
        }
        if far_d < eps {
            break;
        }
        let c = nodes[far_i];
        centers.push(c);
        for (i, &v) in nodes.iter().enumerate() {
            let d = wt.dist(kind, c, v);
            if d < min_d[i] {
                min_d[i] = d;
            }
        }
    }
    Ok(centers)
}

/// Size of the farthest-point cover; an upper bound for the covering number.
pub fn greedy_ball_cover(wt: &WeightedTree, kind: MetricKind, eps: f64) -> Result<u64> {
    Ok(greedy_ball_cover_witness(wt, kind, eps)?.len() as u64)
}

/// Greedy maximal `eps`-separated set in dense node order. Its size at
/// separation `2 eps` is a lower bound for the covering number at `eps`,
/// and at separation `eps` an upper bound.
pub fn packing_witness(wt: &WeightedTree, kind: MetricKind, eps: f64) -> Result<Vec<NodeRef>> {
    check_eps(eps)?;
    if chain_fast_path(wt, kind) {
        let (sig, cum) = wt.level_arrays(kind == MetricKind::DHat).unwrap();
        return Ok(chain_sweep_packing(sig, cum, eps)
            .into_iter()
            .map(|l| wt.tree().node_at(l as u64))
            .collect());
    }
    check_generic_size(wt, "packing_lower_bound")?;
    let mut kept: Vec<NodeRef> = Vec::new();
    for v in wt.tree().nodes() {
        if kept.iter().all(|&k| wt.dist(kind, k, v) >= eps) {
            kept.push(v);
        }
    }
    Ok(kept)
}

/// Size of a greedy maximal `eps`-separated set.
pub fn packing_lower_bound(wt: &WeightedTree, kind: MetricKind, eps: f64) -> Result<u64> {
    Ok(packing_witness(wt, kind, eps)?.len() as u64)
}

/// Exact minimal open-ball cover by exhaustive set cover over all center
/// subsets, for trees of at most [`EXACT_COVER_CAP`] nodes.
pub fn exact_cover_small(wt: &WeightedTree, kind: MetricKind, eps: f64) -> Result<u64> {
    check_eps(eps)?;
    let n = wt.tree().node_count();
    if n > EXACT_COVER_CAP {
        return Err(Error::TooLarge {
            op: "exact_cover_small",
            nodes: n,
            limit: EXACT_COVER_CAP,
        });
    }
    let n = n as usize;
    let nodes: Vec<NodeRef> = wt.tree().nodes().collect();
    // Ball masks per candidate center.
    let balls: Vec<u32> = nodes
        .iter()
        .map(|&c| {
            let mut m = 0u32;
            for (j, &v) in nodes.iter().enumerate() {
                if wt.dist(kind, c, v) < eps {
                    m |= 1 << j;
                }
            }
            m
        })
        .collect();
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    // Breadth-first over covered masks: minimal number of balls to reach
    // the full mask, always extending at the lowest uncovered element.
    let mut best = vec![u8::MAX; (full as usize) + 1];
    best[0] = 0;
    let mut frontier = vec![0u32];
    let mut rounds = 0u64;
    loop {
        let mut next = Vec::new();
        for &mask in &frontier {
            if mask == full {
                return Ok(rounds);
            }
            let lowest = (!mask & full).trailing_zeros() as usize;
            for &b in balls.iter() {
                if b & (1 << lowest) != 0 {
                    let m2 = mask | b;
                    if best[m2 as usize] == u8::MAX {
                        best[m2 as usize] = (rounds + 1) as u8;
                        next.push(m2);
                    }
                }
            }
        }
        rounds += 1;
        frontier = next;
        if frontier.is_empty() {
            // Unreachable: every node covers itself.
            return Err(Error::InvalidParameter("cover search exhausted".into()));
        }
    }
}

/// Top-down greedy order net under the tree metric `d`: a node joins the
/// net when its nearest marked ancestor is at distance `>= eps`. Every node
/// then has a marked ancestor strictly within `eps`, so the result is a
/// valid order net and its size bounds the order covering number above.
pub fn greedy_order_net(wt: &WeightedTree, eps: f64) -> Result<Vec<NodeRef>> {
    check_eps(eps)?;
    let tree = wt.tree();
    if let Some((sig, cum)) = wt.level_arrays(false) {
        if tree.is_chain() {
            let mut net = vec![tree.root()];
            let (mut base, mut run) = (cum[0], 0.0f64);
            for l in 1..sig.len() {
                run = run.max(sig[l] * (cum[l] - base).sqrt());
                if run >= eps {
                    net.push(tree.node_at(l as u64));
                    base = cum[l];
                    run = 0.0;
                }
            }
            return Ok(net);
        }
    }
    check_generic_size(wt, "greedy_order_net")?;
    let root = tree.root();
    let mut net = vec![root];
    // DFS carrying (node, A at marked ancestor, running max over the open
    // segment since that ancestor).
    let mut stack: Vec<(NodeRef, f64, f64)> = tree
        .children(root)
        .into_iter()
        .map(|c| (c, wt.cum_a2(root), 0.0))
        .collect();
    while let Some((v, base, run)) = stack.pop() {
        let here = run.max(wt.sigma(v) * (wt.cum_a2(v) - base).sqrt());
        let (nbase, nrun) = if here >= eps {
            net.push(v);
            (wt.cum_a2(v), 0.0)
        } else {
            (base, here)
        };
        for c in tree.children(v) {
            stack.push((c, nbase, nrun));
        }
    }
    Ok(net)
}

/// Exact minimal order net by exhaustive subset search (tiny trees only):
/// the smallest marked set such that every node has a marked ancestor
/// strictly within `eps` in the metric `d`.
pub fn exact_order_net_small(wt: &WeightedTree, eps: f64) -> Result<u64> {
    check_eps(eps)?;
    let n = wt.tree().node_count();
    if n > EXACT_COVER_CAP {
        return Err(Error::TooLarge {
            op: "exact_order_net_small",
            nodes: n,
            limit: EXACT_COVER_CAP,
        });
    }
    let tree = wt.tree();
    let n = n as usize;
    let nodes: Vec<NodeRef> = tree.nodes().collect();
    // coverers[s] = mask of nodes t with t an ancestor of s and d(t,s) < eps.
    let coverers: Vec<u32> = nodes
        .iter()
        .map(|&s| {
            let mut m = 0u32;
            for (i, &t) in nodes.iter().enumerate() {
                if tree.is_ancestor(t, s) && wt.dist_d(t, s) < eps {
                    m |= 1 << i;
                }
            }
            m
        })
        .collect();
    let mut best = u32::MAX;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() >= best {
            continue;
        }
        if coverers.iter().all(|&c| c & mask != 0) {
            best = mask.count_ones();
        }
    }
    Ok(best as u64)
}

/// A maximum family of pairwise disjoint half-open order intervals
/// `(t_i, s_i]` with `d(t_i, s_i) >= eps`.
#[derive(Clone, Debug)]
pub struct IntervalPacking {
    /// Interval endpoints `(top, bottom)`; the node set is the path from
    /// just below `top` down to `bottom`, inclusive.
    pub intervals: Vec<(NodeRef, NodeRef)>,
    /// Per interval, a node `r` in it with
    /// `sigma(r) * sqrt(sum of alpha^2 over (top, r])  >= eps`.
    pub witnesses: Vec<NodeRef>,
}

impl IntervalPacking {
    pub fn count(&self) -> u64 {
        self.intervals.len() as u64
    }
}

/// Witness `r` maximizing the defining supremum of `d(top, bottom)`.
fn interval_witness(wt: &WeightedTree, top: NodeRef, bottom: NodeRef) -> NodeRef {
    let tree = wt.tree();
    let base = wt.cum_a2(top);
    let mut cur = bottom;
    let (mut best, mut best_v) = (f64::NEG_INFINITY, bottom);
    while cur != top {
        let val = wt.sigma(cur) * (wt.cum_a2(cur) - base).sqrt();
        if val > best {
            best = val;
            best_v = cur;
        }
        cur = tree.parent(cur).expect("top is an ancestor");
    }
    best_v
}

/// Maximum disjoint-interval packing on a chain: take each interval as soon
/// as its defining supremum reaches `eps` (earliest-end rule, optimal by
/// the standard exchange argument for interval scheduling).
fn chain_interval_packing(wt: &WeightedTree, eps: f64) -> IntervalPacking {
    let (sig, cum) = wt.level_arrays(false).unwrap();
    let tree = wt.tree();
    let n = sig.len();
    let mut intervals = Vec::new();
    let mut witnesses = Vec::new();
    let mut top = 0usize;
    let (mut run, mut arg) = (0.0f64, 0usize);
    for s in 1..n {
        let val = sig[s] * (cum[s] - cum[top]).sqrt();
        if val > run {
            run = val;
            arg = s;
        }
        if run >= eps {
            intervals.push((tree.node_at(top as u64), tree.node_at(s as u64)));
            witnesses.push(tree.node_at(arg as u64));
            top = s;
            run = 0.0;
        }
    }
    IntervalPacking { intervals, witnesses }
}

/// One entry of the open-segment table: a pending interval occupying the
/// path from the current node down to `bottom`.
#[derive(Clone, Copy)]
struct OpenSeg {
    bottom: u32,
    count: u64,
    /// Child slot the segment came from; `None` when it starts here.
    via: Option<u32>,
}

/// How the settled optimum at a node was reached.
#[derive(Clone, Copy)]
enum Settle {
    /// All children settled, node unoccupied.
    Spread,
    /// Node tops a closing interval `(parent, bottom]`.
    Close { via: Option<u32>, bottom: u32 },
}

/// Exact maximum disjoint-interval packing on an explicit tree by dynamic
/// programming over (node, open-segment bottom) states.
fn dp_interval_packing(wt: &WeightedTree, eps: f64) -> IntervalPacking {
    let tree = wt.tree();
    let n = tree.node_count() as usize;
    let nodes: Vec<NodeRef> = (0..n as u64).map(|i| tree.node_at(i)).collect();
    // Post-order via reverse finish of an iterative DFS.
    let mut order: Vec<u32> = Vec::with_capacity(n);
    let mut stack = vec![tree.dense_index(tree.root()) as u32];
    while let Some(v) = stack.pop() {
        order.push(v);
        for c in tree.children(nodes[v as usize]) {
            stack.push(tree.dense_index(c) as u32);
        }
    }
    order.reverse();

    let mut settled: Vec<u64> = vec![0; n];
    let mut settle_how: Vec<Settle> = vec![Settle::Spread; n];
    let mut open: Vec<Vec<OpenSeg>> = vec![Vec::new(); n];
    for &vi in &order {
        let v = nodes[vi as usize];
        let kids: Vec<u32> = tree
            .children(v)
            .into_iter()
            .map(|c| tree.dense_index(c) as u32)
            .collect();
        let all_f: u64 = kids.iter().map(|&c| settled[c as usize]).sum();
        let parent = tree.parent(v);

        // Settled optimum: spread, or close an interval topping out here.
        let mut best = all_f;
        let mut how = Settle::Spread;
        if let Some(p) = parent {
            if wt.dist_d(p, v) >= eps && all_f + 1 > best {
                best = all_f + 1;
                how = Settle::Close { via: None, bottom: vi };
            }
            for (slot, &c) in kids.iter().enumerate() {
                let others = all_f - settled[c as usize];
                for seg in &open[c as usize] {
                    if seg.count + others + 1 > best
                        && wt.dist_d(p, nodes[seg.bottom as usize]) >= eps
                    {
                        best = seg.count + others + 1;
                        how = Settle::Close {
                            via: Some(slot as u32),
                            bottom: seg.bottom,
                        };
                    }
                }
            }
        }
        settled[vi as usize] = best;
        settle_how[vi as usize] = how;

        // Open segments through this node (noop at the root: unclosable).
        if parent.is_some() {
            let mut segs = vec![OpenSeg {
                bottom: vi,
                count: all_f,
                via: None,
            }];
            for (slot, &c) in kids.iter().enumerate() {
                let others = all_f - settled[c as usize];
                for seg in &open[c as usize] {
                    segs.push(OpenSeg {
                        bottom: seg.bottom,
                        count: seg.count + others,
                        via: Some(slot as u32),
                    });
                }
            }
            open[vi as usize] = segs;
        }
    }

    // Reconstruct the chosen intervals: walk settled/open decisions down.
    let mut intervals = Vec::new();
    enum Task {
        Settled(u32),
        /// Follow the open segment with this bottom through the node.
        Open(u32, u32),
    }
    let mut tasks = vec![Task::Settled(tree.dense_index(tree.root()) as u32)];
    while let Some(task) = tasks.pop() {
        match task {
            Task::Settled(vi) => {
                let v = nodes[vi as usize];
                let kids: Vec<u32> = tree
                    .children(v)
                    .into_iter()
                    .map(|c| tree.dense_index(c) as u32)
                    .collect();
                match settle_how[vi as usize] {
                    Settle::Spread => {
                        tasks.extend(kids.into_iter().map(Task::Settled));
                    }
                    Settle::Close { via, bottom } => {
                        let top = tree.parent(v).expect("close needs a parent");
                        intervals.push((top, nodes[bottom as usize]));
                        for (slot, c) in kids.into_iter().enumerate() {
                            match via {
                                Some(s) if s == slot as u32 => {
                                    tasks.push(Task::Open(c, bottom))
                                }
                                _ => tasks.push(Task::Settled(c)),
                            }
                        }
                    }
                }
            }
            Task::Open(vi, bottom) => {
                let v = nodes[vi as usize];
                let seg = open[vi as usize]
                    .iter()
                    .find(|s| s.bottom == bottom)
                    .expect("recorded segment");
                let kids: Vec<u32> = tree
                    .children(v)
                    .into_iter()
                    .map(|c| tree.dense_index(c) as u32)
                    .collect();
                for (slot, c) in kids.into_iter().enumerate() {
                    match seg.via {
                        Some(s) if s == slot as u32 => tasks.push(Task::Open(c, bottom)),
                        _ => tasks.push(Task::Settled(c)),
                    }
                }
            }
        }
    }

    let witnesses = intervals
        .iter()
        .map(|&(t, s)| interval_witness(wt, t, s))
        .collect();
    IntervalPacking { intervals, witnesses }
}

/// Maximum family of pairwise disjoint half-open order intervals
/// `(t_i, s_i]` with `d(t_i, s_i) >= eps`, together with the per-interval
/// witness nodes certifying the distance. The family size `m` obeys
/// `m + 1 >= N(T, d, 2 eps)`.
pub fn disjoint_interval_packing(wt: &WeightedTree, eps: f64) -> Result<IntervalPacking> {
    check_eps(eps)?;
    let tree = wt.tree();
    if tree.is_chain() && wt.is_level() {
        return Ok(chain_interval_packing(wt, eps));
    }
    let n = tree.node_count();
    if n > PACKING_NODE_CAP {
        return Err(Error::TooLarge {
            op: "disjoint_interval_packing",
            nodes: n,
            limit: PACKING_NODE_CAP,
        });
    }
    match tree.kind() {
        TreeKind::Explicit => Ok(dp_interval_packing(wt, eps)),
        _ => {
            // Small implicit tree: materialize, solve, map refs back.
            let mat = tree.to_explicit()?;
            let wt2 = WeightedTree::new(&mat, wt.weights())?;
            let packed = dp_interval_packing(&wt2, eps);
            let back =
                |v: NodeRef| tree.node_at(mat.external_id(v).expect("materialized node"));
            Ok(IntervalPacking {
                intervals: packed.intervals.iter().map(|&(t, s)| (back(t), back(s))).collect(),
                witnesses: packed.witnesses.iter().map(|&r| back(r)).collect(),
            })
        }
    }
}

/// Certified covering bounds at one radius: exact sweep on chains under
/// branch-monotone metrics, otherwise farthest-point upper bound plus
/// separation lower bound (and exhaustive exact on tiny trees).
pub fn covering_number(wt: &WeightedTree, kind: MetricKind, eps: f64) -> Result<CoverResult> {
    check_eps(eps)?;
    let tree = wt.tree();
    if chain_fast_path(wt, kind) {
        let (sig, cum) = wt.level_arrays(kind == MetricKind::DHat).unwrap();
        let centers = chain_sweep_cover(sig, cum, eps);
        let packing = chain_sweep_packing(sig, cum, 2.0 * eps);
        let exact = centers.len() as u64;
        return Ok(CoverResult {
            epsilon: eps,
            lower_bound: packing.len() as u64,
            upper_bound: exact,
            exact: Some(exact),
            net: centers.into_iter().map(|l| tree.node_at(l as u64)).collect(),
            packing: packing.into_iter().map(|l| tree.node_at(l as u64)).collect(),
        });
    }
    let net = greedy_ball_cover_witness(wt, kind, eps)?;
    let packing = packing_witness(wt, kind, 2.0 * eps)?;
    let exact = if tree.node_count() <= EXACT_COVER_CAP {
        Some(exact_cover_small(wt, kind, eps)?)
    } else {
        None
    };
    Ok(CoverResult {
        epsilon: eps,
        lower_bound: packing.len() as u64,
        upper_bound: net.len() as u64,
        exact,
        net,
        packing,
    })
}

/// Strictly decreasing geometric radius grid.
pub fn geometric_grid(eps_max: f64, eps_min: f64, points: usize) -> Result<Vec<f64>> {
    if !(eps_max.is_finite() && eps_min.is_finite()) || eps_min <= 0.0 || eps_max <= eps_min {
        return Err(Error::InvalidParameter(format!(
            "need 0 < eps_min < eps_max, got [{eps_min}, {eps_max}]"
        )));
    }
    if points < 2 {
        return Err(Error::InvalidParameter("grid needs at least 2 points".into()));
    }
    let ratio = (eps_min / eps_max).powf(1.0 / (points as f64 - 1.0));
    let mut grid: Vec<f64> = (0..points).map(|i| eps_max * ratio.powi(i as i32)).collect();
    *grid.last_mut().unwrap() = eps_min;
    Ok(grid)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty radius grid".into()));
    }
    for w in grid.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::InvalidParameter(
                "radius grid must be strictly decreasing".into(),
            ));
        }
    }
    check_eps(grid[grid.len() - 1])?;
    check_eps(grid[0])
}

/// Covering bounds along a radius grid. Bounds are tightened across the
/// grid by witness reuse: a separated set stays valid at smaller radii, a
/// cover stays valid at larger radii, so the reported curves are monotone.
pub fn covering_curve(wt: &WeightedTree, kind: MetricKind, grid: &[f64]) -> Result<EntropyCurve> {
    check_grid(grid)?;
    let mut points: Vec<CoverResult> = grid
        .par_iter()
        .map(|&eps| covering_number(wt, kind, eps))
        .collect::<Result<_>>()?;
    // Larger radius inherits any smaller-radius cover.
    for j in (0..points.len().saturating_sub(1)).rev() {
        if points[j + 1].upper_bound < points[j].upper_bound {
            points[j].upper_bound = points[j + 1].upper_bound;
            points[j].net = points[j + 1].net.clone();
        }
    }
    // Smaller radius inherits any larger-radius separated set.
    for j in 1..points.len() {
        if points[j - 1].lower_bound > points[j].lower_bound {
            points[j].lower_bound = points[j - 1].lower_bound;
            points[j].packing = points[j - 1].packing.clone();
        }
    }
    debug_assert!(points.iter().all(|p| {
        p.lower_bound <= p.upper_bound
            && p.exact.map_or(true, |e| p.lower_bound <= e && e <= p.upper_bound)
    }));
    Ok(EntropyCurve { metric: kind, points })
}

/// Truncated chaining functional of a covering curve.
#[derive(Clone, Copy, Debug)]
pub struct DudleyBound {
    /// Right-endpoint upper sum of `sqrt(log N)` over the grid.
    pub value: f64,
    /// True when nothing is missed above the grid (one ball suffices at
    /// the largest radius).
    pub head_complete: bool,
    /// Smallest radius reached; the integral below it is not included.
    pub tail_epsilon: f64,
    /// Bound on the missing tail for this finite index set:
    /// `tail_epsilon * sqrt(log N(tail_epsilon))`.
    pub tail_term: f64,
}

/// Upper estimate of `integral of sqrt(log N(eps)) d eps` over the grid
/// span, using upper bounds and right endpoints (the integrand grows as
/// the radius shrinks, so each strip is overestimated).
pub fn dudley_integral(curve: &EntropyCurve) -> Result<DudleyBound> {
    if curve.points.is_empty() {
        return Err(Error::InvalidParameter("empty covering curve".into()));
    }
    let pts = &curve.points;
    let mut value = 0.0f64;
    for w in pts.windows(2) {
        let n = w[1].upper_bound.max(1) as f64;
        value += (w[0].epsilon - w[1].epsilon) * n.ln().sqrt();
    }
    let last = &pts[pts.len() - 1];
    let tail_n = last.upper_bound.max(1) as f64;
    Ok(DudleyBound {
        value,
        head_complete: pts[0].upper_bound <= 1,
        tail_epsilon: last.epsilon,
        tail_term: last.epsilon * tail_n.ln().sqrt(),
    })
}

/// `max over the grid of eps * sqrt(log lower_bound(eps))`; a certified
/// lower-order functional (finite for bounded processes).
pub fn sudakov_sup(curve: &EntropyCurve) -> Result<f64> {
    if curve.points.is_empty() {
        return Err(Error::InvalidParameter("empty covering curve".into()));
    }
    Ok(curve
        .points
        .iter()
        .map(|p| p.epsilon * (p.lower_bound.max(1) as f64).ln().sqrt())
        .fold(0.0, f64::max))
}

/// One grid row comparing the tree metric with the canonical metric.
#[derive(Clone, Copy, Debug)]
pub struct EquivalenceRow {
    pub epsilon: f64,
    pub n_d: u64,
    pub n_dx: u64,
    /// `eps^2 * log N(T, d, eps)`.
    pub scaled_log_d: f64,
    /// `eps^2 * log N(T, dX, eps)`.
    pub scaled_log_dx: f64,
    /// Raw covering-number ratio `N_dX / N_d`.
    pub ratio: f64,
}

/// Paired entropy comparison of `d` and `dX` on one radius grid.
#[derive(Clone, Debug)]
pub struct EquivalenceReport {
    pub rows: Vec<EquivalenceRow>,
    pub dudley_d: DudleyBound,
    pub dudley_dx: DudleyBound,
    pub sudakov_d: f64,
    pub sudakov_dx: f64,
}

/// Compare covering growth under the two metrics: per-radius table of
/// `eps^2 log N` (which stays comparable) and the raw ratio (which can
/// diverge), plus both chaining functionals.
pub fn entropy_equivalence_report(
    wt: &WeightedTree,
    grid: &[f64],
) -> Result<EquivalenceReport> {
    let curve_d = covering_curve(wt, MetricKind::D, grid)?;
    let curve_dx = covering_curve(wt, MetricKind::Dx, grid)?;
    let rows = curve_d
        .points
        .iter()
        .zip(curve_dx.points.iter())
        .map(|(d, dx)| {
            let n_d = d.exact.unwrap_or(d.upper_bound);
            let n_dx = dx.exact.unwrap_or(dx.upper_bound);
            EquivalenceRow {
                epsilon: d.epsilon,
                n_d,
                n_dx,
                scaled_log_d: d.epsilon * d.epsilon * (n_d as f64).ln(),
                scaled_log_dx: d.epsilon * d.epsilon * (n_dx as f64).ln(),
                ratio: n_dx as f64 / n_d as f64,
            }
        })
        .collect();
    Ok(EquivalenceReport {
        rows,
        dudley_d: dudley_integral(&curve_d)?,
        dudley_dx: dudley_integral(&curve_dx)?,
        sudakov_d: sudakov_sup(&curve_d)?,
        sudakov_dx: sudakov_sup(&curve_dx)?,
    })
}

/// Least-squares slope of `log count` against `log(1/eps)` over the middle
/// of the grid (10% trimmed at each end to suppress saturation at the
/// extremes). `None` when fewer than three usable points remain.
pub fn log_log_slope(points: &[(f64, u64)]) -> Option<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(eps, n)| eps > 0.0 && n >= 1)
        .map(|&(eps, n)| ((1.0 / eps).ln(), (n as f64).ln()))
        .collect();
    let trim = usable.len() / 10;
    let mid = &usable[trim..usable.len() - trim];
    if mid.len() < 3 {
        return None;
    }
    let n = mid.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in mid {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let denom = n * sxx - sx * sx;
    if denom <= 0.0 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

//! Subcommand drivers: wire a resolved config to the library and write
//! CSV/JSON artifacts.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde_json::{json, Value};

use treegauss::criteria::{self, CriterionKind, CriterionTrace, Verdict};
use treegauss::entropy::{
    covering_curve, dudley_integral, entropy_equivalence_report, log_log_slope, sudakov_sup,
    DudleyBound, EntropyCurve,
};
use treegauss::metrics::{MetricKind, WeightedTree};
use treegauss::sim::{estimate_esup, SimConfig, SimEstimate};
use treegauss::tree::TreeKind;
use treegauss::WeightSystem;

use crate::config::{ExperimentConfig, Overrides};

/// Largest tree for which the root-distance table is materialized; the
/// table costs a root walk per node.
const DISTANCE_TABLE_NODE_CAP: u64 = 20_000;

/// Where artifacts go and how chatty to be.
pub struct Ctx<'a> {
    pub out: &'a Path,
    pub quiet: bool,
}

impl Ctx<'_> {
    fn write(&self, name: &str, content: &str) -> Result<()> {
        std::fs::create_dir_all(self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(name);
        std::fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
        if !self.quiet {
            println!("wrote {}", path.display());
        }
        Ok(())
    }
}

/// serde_json maps are ordered, so any value round-tripped through
/// `Value` serializes with sorted keys.
fn sorted_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("value serialization cannot fail");
    s.push('\n');
    s
}

fn config_value(cfg: &ExperimentConfig) -> Value {
    serde_json::to_value(cfg).expect("config serialization cannot fail")
}

/// Leading CSV comment carrying the fully-resolved config.
fn config_comment(cfg: &ExperimentConfig) -> String {
    let compact =
        serde_json::to_string(&config_value(cfg)).expect("config serialization cannot fail");
    format!("# config {compact}\n")
}

fn dudley_value(b: &DudleyBound) -> Value {
    json!({
        "value": b.value,
        "head_complete": b.head_complete,
        "tail_epsilon": b.tail_epsilon,
        "tail_term": b.tail_term,
    })
}

fn curve_counts(curve: &EntropyCurve) -> Vec<(f64, u64)> {
    curve
        .points
        .iter()
        .map(|p| (p.epsilon, p.exact.unwrap_or(p.upper_bound)))
        .collect()
}

/// Covering-number curve plus chaining functionals for one metric.
pub fn run_entropy(cfg: &ExperimentConfig, ctx: &Ctx) -> Result<()> {
    let tree = cfg.require_tree()?.build()?;
    let weights = cfg.require_weights()?;
    let wt = WeightedTree::new(&tree, weights)?;
    let grid = cfg.require_grid()?;
    let kind = cfg.metric.unwrap_or(MetricKind::D);
    let curve = covering_curve(&wt, kind, &grid)?;

    let mut csv = config_comment(cfg);
    csv.push_str("epsilon,lower_bound,upper_bound,exact\n");
    for p in &curve.points {
        let exact = p.exact.map(|e| e.to_string()).unwrap_or_default();
        writeln!(csv, "{},{},{},{exact}", p.epsilon, p.lower_bound, p.upper_bound).unwrap();
    }
    ctx.write("entropy_curve.csv", &csv)?;

    let dudley = dudley_integral(&curve)?;
    let sudakov = sudakov_sup(&curve)?;
    let slope = log_log_slope(&curve_counts(&curve));
    let summary = json!({
        "config": config_value(cfg),
        "metric": kind.label(),
        "dudley": dudley_value(&dudley),
        "sudakov": sudakov,
        "log_log_slope": slope,
    });
    ctx.write("entropy_summary.json", &sorted_pretty(&summary))
}

/// Paired covering curves for `d` and the process distance, plus the
/// root-distance table on trees small enough to walk.
pub fn run_compare_metrics(cfg: &ExperimentConfig, ctx: &Ctx) -> Result<()> {
    let tree = cfg.require_tree()?.build()?;
    let weights = cfg.require_weights()?;
    let wt = WeightedTree::new(&tree, weights)?;
    let grid = cfg.require_grid()?;
    let report = entropy_equivalence_report(&wt, &grid)?;

    let mut csv = config_comment(cfg);
    csv.push_str("epsilon,n_d,n_dx,scaled_log_d,scaled_log_dx,ratio\n");
    for r in &report.rows {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.epsilon, r.n_d, r.n_dx, r.scaled_log_d, r.scaled_log_dx, r.ratio
        )
        .unwrap();
    }
    ctx.write("metric_curves.csv", &csv)?;

    let table_written = if tree.node_count() <= DISTANCE_TABLE_NODE_CAP
        && !matches!(tree.kind(), TreeKind::Binary { .. })
    {
        let root = tree.root();
        let mut csv = config_comment(cfg);
        csv.push_str("node,depth,d_root,dx_root\n");
        for i in 0..tree.node_count() {
            let t = tree.node_at(i);
            writeln!(
                csv,
                "{i},{},{},{}",
                tree.depth(t),
                wt.dist_d(root, t),
                wt.dist_dx(root, t)
            )
            .unwrap();
        }
        ctx.write("distance_table.csv", &csv)?;
        true
    } else {
        false
    };

    let d_counts: Vec<(f64, u64)> = report.rows.iter().map(|r| (r.epsilon, r.n_d)).collect();
    let dx_counts: Vec<(f64, u64)> = report.rows.iter().map(|r| (r.epsilon, r.n_dx)).collect();
    let summary = json!({
        "config": config_value(cfg),
        "dudley_d": dudley_value(&report.dudley_d),
        "dudley_dx": dudley_value(&report.dudley_dx),
        "sudakov_d": report.sudakov_d,
        "sudakov_dx": report.sudakov_dx,
        "slope_d": log_log_slope(&d_counts),
        "slope_dx": log_log_slope(&dx_counts),
        "ratio_largest_eps": report.rows.first().map(|r| r.ratio),
        "ratio_smallest_eps": report.rows.last().map(|r| r.ratio),
        "distance_table_written": table_written,
    });
    ctx.write("compare_summary.json", &sorted_pretty(&summary))
}

/// Least-squares slope of `y` against `log2(depth)`.
fn depth_slope(rows: &[(u32, f64)]) -> Option<f64> {
    if rows.len() < 2 {
        return None;
    }
    let n = rows.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &(depth, y) in rows {
        let x = f64::from(depth).log2();
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

/// Monte Carlo estimates of the supremum statistic across depths.
pub fn run_simulate(cfg: &ExperimentConfig, ctx: &Ctx, prefix: &str) -> Result<()> {
    let sim = SimConfig {
        tree: cfg.require_tree()?.clone(),
        weights: cfg.require_weights()?.clone(),
        replicas: cfg.replicas(),
        seed: cfg.seed(),
        depths: cfg.depths.clone(),
        statistic: cfg.statistic.unwrap_or_default(),
        keep_raw: false,
    };
    let est = estimate_esup(&sim)?;
    write_simulation(&sim, &est, ctx, prefix)
}

fn write_simulation(sim: &SimConfig, est: &SimEstimate, ctx: &Ctx, prefix: &str) -> Result<()> {
    let sim_value = serde_json::to_value(sim).expect("config serialization cannot fail");
    let compact = serde_json::to_string(&sim_value).expect("config serialization cannot fail");
    let mut csv = format!("# config {compact}\n");
    csv.push_str("depth,replicas,mean,stderr\n");
    for row in &est.rows {
        writeln!(csv, "{},{},{},{}", row.depth, est.replicas, row.mean, row.stderr).unwrap();
    }
    ctx.write(&format!("{prefix}simulate.csv"), &csv)?;

    let points: Vec<(u32, f64)> = est.rows.iter().map(|r| (r.depth, r.mean)).collect();
    let summary = json!({
        "config": sim_value,
        "estimate": serde_json::to_value(est).expect("estimate serialization cannot fail"),
        "mean_slope_vs_log2_depth": depth_slope(&points),
    });
    ctx.write(&format!("{prefix}simulate_summary.json"), &sorted_pretty(&summary))
}

fn trace_value(t: &CriterionTrace) -> Value {
    let checkpoints: Vec<Value> = t
        .checkpoints
        .iter()
        .map(|c| json!({"n": c.n, "value": c.value, "ln_value": c.ln_value}))
        .collect();
    json!({
        "checkpoints": checkpoints,
        "trend": t.trend,
        "truncation": t.truncation,
        "value": t.value,
        "ln_value": t.ln_value,
    })
}

fn verdict_value(v: &Verdict, weights: &WeightSystem) -> Value {
    let mut traces = serde_json::Map::new();
    for t in &v.traces {
        let key = match t.criterion {
            CriterionKind::G => "G",
            CriterionKind::Q => "Q",
            CriterionKind::G1 => "G1",
            CriterionKind::G2 => "G2",
            CriterionKind::CondSum => "condsum",
        };
        traces.insert(key.to_string(), trace_value(t));
    }
    json!({
        "classification": v.classification,
        "rule": v.rule,
        "certainty": v.certainty,
        "traces": Value::Object(traces),
        "truncation": v.truncation,
        "weights": weights,
    })
}

/// Boundedness verdicts: one weight system, or a batch.
pub fn run_criteria(cfg: &ExperimentConfig, ctx: &Ctx, prefix: &str) -> Result<()> {
    let truncation = cfg.truncation.unwrap_or(criteria::DEFAULT_TRUNCATION);
    if !cfg.batch.is_empty() {
        let mut verdicts = Vec::with_capacity(cfg.batch.len());
        for w in &cfg.batch {
            let v = criteria::combined_verdict(w, truncation)?;
            verdicts.push(verdict_value(&v, w));
        }
        let out = json!({"config": config_value(cfg), "verdicts": verdicts});
        return ctx.write(&format!("{prefix}verdicts.json"), &sorted_pretty(&out));
    }
    let weights = cfg.require_weights()?;
    let v = criteria::combined_verdict(weights, truncation)?;
    let mut out = verdict_value(&v, weights);
    out.as_object_mut()
        .expect("verdict report is an object")
        .insert("config".to_string(), config_value(cfg));
    ctx.write(&format!("{prefix}verdict.json"), &sorted_pretty(&out))
}

/// Frozen experiments bundled with the binary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Target {
    /// Covering growth of the power-weighted chain under both metrics.
    ChainEntropy,
    /// Chain whose d-distance from the root stays at 1/2 while the
    /// process distance collapses.
    MetricContrast,
    /// A bounded and an unbounded weight pair raced across binary depths.
    GrowthContrast,
    /// Geometric increments against scales straddling the energy boundary.
    GeometricBoundary,
    /// Verdicts before and after folding the scale into the increments.
    Onesided,
}

const CHAIN_ENTROPY: &str = include_str!("../configs/chain-entropy.json");
const METRIC_CONTRAST: &str = include_str!("../configs/metric-contrast.json");
const GROWTH_BOUNDED: &str = include_str!("../configs/growth-contrast-bounded.json");
const GROWTH_UNBOUNDED: &str = include_str!("../configs/growth-contrast-unbounded.json");
const GEOMETRIC_BOUNDARY: &str = include_str!("../configs/geometric-boundary.json");
const ONESIDED: &str = include_str!("../configs/onesided.json");

fn embedded(text: &str, over: &Overrides) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::parse(text)?;
    Ok(cfg.resolve(over)?)
}

pub fn run_reproduce(target: Target, over: &Overrides, ctx: &Ctx) -> Result<()> {
    match target {
        Target::ChainEntropy => run_compare_metrics(&embedded(CHAIN_ENTROPY, over)?, ctx),
        Target::MetricContrast => run_compare_metrics(&embedded(METRIC_CONTRAST, over)?, ctx),
        Target::GrowthContrast => {
            let bounded = embedded(GROWTH_BOUNDED, over)?;
            let unbounded = embedded(GROWTH_UNBOUNDED, over)?;
            run_simulate(&bounded, ctx, "bounded_")?;
            run_simulate(&unbounded, ctx, "unbounded_")?;
            run_criteria(&bounded, ctx, "bounded_")?;
            run_criteria(&unbounded, ctx, "unbounded_")
        }
        Target::GeometricBoundary => run_criteria(&embedded(GEOMETRIC_BOUNDARY, over)?, ctx, ""),
        Target::Onesided => {
            let original = embedded(ONESIDED, over)?;
            run_criteria(&original, ctx, "original_")?;
            let transferred = criteria::product_weight_transfer(original.require_weights()?)?;
            let mut folded = original.clone();
            folded.weights = Some(transferred);
            run_criteria(&folded, ctx, "transfer_")
        }
    }
}

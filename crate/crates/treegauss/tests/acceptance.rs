//! Release gate: one test per acceptance criterion. Each prints a single
//! PASS/FAIL line (visible under `--nocapture`) with the pinned thresholds
//! inline, then asserts.

use treegauss::criteria::{
    combined_verdict, eval_g1, eval_g2, product_weight_transfer, Classification, Rule,
    DEFAULT_TRUNCATION, G1_TRUNCATION_CAP,
};
use treegauss::entropy::{
    covering_curve, disjoint_interval_packing, entropy_equivalence_report, exact_cover_small,
    exact_order_net_small, geometric_grid, greedy_ball_cover, log_log_slope, packing_lower_bound,
};
use treegauss::metrics::{check_metric_axioms, MetricKind, WeightedTree};
use treegauss::rng::{replica_stream, SplitMix64};
use treegauss::sim::{
    decomposition_residuals, estimate_esup, independent_max_lower, max_upper, SimConfig,
    Statistic, EMAX_TWO_NORMALS,
};
use treegauss::tree::NodeDoc;
use treegauss::{LevelSeq, Tree, TreeSpec, WeightSystem};

fn report(name: &str, pass: bool, detail: &str) -> bool {
    println!("acceptance {name}: {} [{detail}]", if pass { "PASS" } else { "FAIL" });
    pass
}

fn level(alpha: LevelSeq, sigma: LevelSeq) -> WeightSystem {
    WeightSystem::level(alpha, sigma).expect("weight corpus entries are valid")
}

/// Least-squares fit of `y` against `x`; returns (slope, rms residual).
fn line_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0f64, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let ss: f64 = points
        .iter()
        .map(|&(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    (slope, (ss / n).sqrt())
}

/// Random recursive tree on 2..=max_nodes nodes: node i attaches to a
/// uniform earlier node.
fn random_tree(rng: &mut SplitMix64, max_nodes: u64) -> Tree {
    let n = 2 + rng.below(max_nodes - 1);
    let mut docs = vec![NodeDoc { id: 0, parent: None }];
    for i in 1..n {
        docs.push(NodeDoc {
            id: i,
            parent: Some(rng.below(i)),
        });
    }
    Tree::from_node_docs(&docs).expect("generated parent links are valid")
}

/// Per-node weights with positive increments and a scale that decays
/// along every root path, so the order-compatible distance laws apply.
fn random_weights(rng: &mut SplitMix64, tree: &Tree) -> WeightSystem {
    let n = tree.node_count() as usize;
    let mut alpha = vec![0.0f64; n];
    let mut sigma = vec![0.0f64; n];
    for i in 0..n {
        let t = tree.node_at(i as u64);
        alpha[i] = 0.05 + 2.0 * rng.next_f64();
        sigma[i] = match tree.parent(t) {
            None => 0.5 + rng.next_f64(),
            Some(p) => sigma[tree.dense_index(p) as usize] * (0.6 + 0.4 * rng.next_f64()),
        };
    }
    WeightSystem::per_node(alpha, sigma).expect("generated weights are valid")
}

// Criterion 1: on a depth-1e5 chain with increments k^-2 and scale k^-1,
// the covering numbers of d follow a power law of exponent 1/(theta+nu)
// = 1/3, and the greedy cover stays within factor 4 of the packing
// lower bound at every radius.
#[test]
fn chain_covering_growth_matches_power_law() {
    let tree = Tree::chain(100_000);
    let w = level(
        LevelSeq::PowerK { gamma: 2.0, at0: 1.0 },
        LevelSeq::PowerK { gamma: 1.0, at0: 1.0 },
    );
    let wt = WeightedTree::new(&tree, &w).unwrap();
    let grid = geometric_grid(1e-2, 1e-9, 64).unwrap();
    let curve = covering_curve(&wt, MetricKind::D, &grid).unwrap();

    let counts: Vec<(f64, u64)> = curve
        .points
        .iter()
        .map(|p| (p.epsilon, p.exact.expect("chain covering numbers are exact")))
        .collect();
    let slope = log_log_slope(&counts).expect("grid leaves enough interior points");
    let mut worst_bracket = 0.0f64;
    for p in &curve.points {
        assert!(p.lower_bound >= 1, "packing witness must be nonempty");
        worst_bracket = worst_bracket.max(p.upper_bound as f64 / p.lower_bound as f64);
    }

    let pass = (slope - 1.0 / 3.0).abs() <= 0.08 && worst_bracket <= 4.0;
    assert!(report(
        "chain_covering_growth",
        pass,
        &format!("slope {slope:.4} vs 0.3333 +/- 0.08; cover/packing factor {worst_bracket:.2} <= 4"),
    ));
}

// Criterion 2: with increments 1/k and scale 2^-k the tree distance from
// the root is identically 1/2 while the process distance collapses below
// 1e-3 from level 14 on.
#[test]
fn flat_tree_distance_with_vanishing_process_distance() {
    let tree = Tree::chain(10_000);
    let w = level(
        LevelSeq::PowerK { gamma: 1.0, at0: 0.0 },
        LevelSeq::Geometric { q: 0.5 },
    );
    let wt = WeightedTree::new(&tree, &w).unwrap();
    let root = tree.root();

    let mut worst_d_err = 0.0f64;
    let mut worst_dx_tail = 0.0f64;
    for k in 1..=10_000u64 {
        let t = tree.node_at(k);
        worst_d_err = worst_d_err.max((wt.dist_d(root, t) - 0.5).abs());
        if k >= 14 {
            worst_dx_tail = worst_dx_tail.max(wt.dist_dx(root, t));
        }
    }

    let pass = worst_d_err < 1e-12 && worst_dx_tail < 1e-3;
    assert!(report(
        "flat_distance_contrast",
        pass,
        &format!("max |d - 0.5| = {worst_d_err:.2e} < 1e-12; max dx beyond level 14 = {worst_dx_tail:.2e} < 1e-3"),
    ));
}

// Criterion 3: Monte Carlo means of the supremum over binary trees
// separate a bounded system (flat path mean) from a divergent one
// (harmonic increments) across depths 10..22.
#[test]
fn supremum_growth_separates_bounded_from_divergent() {
    let depths = vec![10u32, 14, 18, 22];
    let run = |alpha: LevelSeq, sigma: LevelSeq| {
        let cfg = SimConfig {
            tree: TreeSpec::Binary { depth: 22 },
            weights: level(alpha, sigma),
            replicas: 100,
            seed: 0x5EED,
            depths: depths.clone(),
            statistic: Statistic::SupAbs,
            keep_raw: false,
        };
        estimate_esup(&cfg).unwrap()
    };

    let flat = run(LevelSeq::Constant { c: 1.0 }, LevelSeq::Power { gamma: 1.0 });
    let divergent = run(LevelSeq::Power { gamma: 1.0 }, LevelSeq::Constant { c: 1.0 });

    let points = |est: &treegauss::sim::SimEstimate| -> Vec<(f64, f64)> {
        est.rows
            .iter()
            .map(|r| (f64::from(r.depth).log2(), r.mean))
            .collect()
    };
    let (slope_div, rms_div) = line_fit(&points(&divergent));
    let (slope_flat, _) = line_fit(&points(&flat));
    let flat_first = flat.rows.first().unwrap().mean;
    let flat_last = flat.rows.last().unwrap().mean;

    let pass = slope_div > 0.15
        && rms_div < slope_div
        && slope_flat < 0.08
        && flat_last < 1.3 * flat_first;
    assert!(report(
        "supremum_growth_contrast",
        pass,
        &format!(
            "divergent slope {slope_div:.3} > 0.15 (rms {rms_div:.3}); flat slope {slope_flat:.3} < 0.08, mean ratio {:.3} < 1.3",
            flat_last / flat_first
        ),
    ));
}

// Criterion 4: on random small trees the covering-number estimates obey
// packing(2e) <= N(e) <= greedy(e), the order-net relaxation N <= N~ and
// N~(2e) <= N(e), and interval packings give N(2e) <= packing + 1.
#[test]
fn covering_bounds_cross_validate_on_random_trees() {
    let mut rng = SplitMix64::new(0x7EE5);
    let mut violations = 0u32;
    let mut checks = 0u32;

    for _ in 0..50 {
        let tree = random_tree(&mut rng, 12);
        let w = random_weights(&mut rng, &tree);
        let wt = WeightedTree::new(&tree, &w).unwrap();

        let nodes: Vec<_> = tree.nodes().collect();
        let mut diameter = 0.0f64;
        for (i, &s) in nodes.iter().enumerate() {
            for &t in &nodes[i + 1..] {
                diameter = diameter.max(wt.dist_d(s, t));
            }
        }
        assert!(diameter > 0.0, "random weights give positive diameter");

        for frac in [0.9, 0.5, 0.25, 0.1, 0.02] {
            let eps = diameter * frac;
            for kind in [MetricKind::D, MetricKind::DHat, MetricKind::Dx] {
                let exact = exact_cover_small(&wt, kind, eps).unwrap();
                let greedy = greedy_ball_cover(&wt, kind, eps).unwrap();
                let packing2 = packing_lower_bound(&wt, kind, 2.0 * eps).unwrap();
                checks += 1;
                if !(packing2 <= exact && exact <= greedy) {
                    violations += 1;
                }
            }
            let n_eps = exact_cover_small(&wt, MetricKind::D, eps).unwrap();
            let n_2eps = exact_cover_small(&wt, MetricKind::D, 2.0 * eps).unwrap();
            let net_eps = exact_order_net_small(&wt, eps).unwrap();
            let net_2eps = exact_order_net_small(&wt, 2.0 * eps).unwrap();
            let intervals = disjoint_interval_packing(&wt, eps).unwrap().count();
            checks += 3;
            if n_eps > net_eps {
                violations += 1;
            }
            if net_2eps > n_eps {
                violations += 1;
            }
            if intervals + 1 < n_2eps {
                violations += 1;
            }
        }
    }

    let pass = violations == 0;
    assert!(report(
        "covering_cross_validation",
        pass,
        &format!("{violations} violations in {checks} bound checks (required 0)"),
    ));
}

// Criterion 5: the localization identities hold pathwise to 1e-10, the
// dyadic scale surrogate stays inside [d, 2d] on comparable pairs, and d
// satisfies the metric axioms to 1e-9.
#[test]
fn pathwise_identities_and_axioms_on_random_trees() {
    let mut rng = SplitMix64::new(0xDEC0);
    let mut worst_residual = 0.0f64;
    let mut worst_sandwich = 0.0f64;
    let mut axiom_failures = 0u32;
    let mut axioms_checked = 0u32;

    for i in 0..50u64 {
        // Every fifth tree is kept small so the cubic axiom sweep stays cheap.
        let cap = if i % 5 == 4 { 60 } else { 500 };
        let tree = random_tree(&mut rng, cap);
        let w = random_weights(&mut rng, &tree);
        let wt = WeightedTree::new(&tree, &w).unwrap();

        for replica in 0..10u64 {
            let r = decomposition_residuals(&tree, &w, replica_stream(0xBEEF, i * 10 + replica))
                .unwrap();
            worst_residual = worst_residual.max(r.y_to_x).max(r.x_to_y).max(r.sandwich);
        }

        for t in tree.nodes() {
            let mut above = tree.parent(t);
            while let Some(p) = above {
                let d = wt.dist_d(p, t);
                let dh = wt.dist_dhat(p, t);
                if d > 0.0 {
                    worst_sandwich = worst_sandwich.max((d - dh) / d).max((dh - 2.0 * d) / (2.0 * d));
                }
                above = tree.parent(p);
            }
        }

        if tree.node_count() <= 60 {
            axioms_checked += 1;
            if !check_metric_axioms(&wt, MetricKind::D).is_metric(1e-9) {
                axiom_failures += 1;
            }
        }
    }

    assert!(axioms_checked >= 10, "generator must produce small trees for the axiom sweep");
    let pass = worst_residual <= 1e-10 && worst_sandwich <= 1e-10 && axiom_failures == 0;
    assert!(report(
        "pathwise_identities",
        pass,
        &format!(
            "worst identity residual {worst_residual:.2e} <= 1e-10; worst sandwich excess {worst_sandwich:.2e} <= 1e-10; {axiom_failures} axiom failures in {axioms_checked} trees"
        ),
    ));
}

// Criterion 6: on stars the supremum is a maximum of independent
// Gaussians, so its mean sits in the classical bracket
// [0.64 sqrt(ln n), sqrt(2 ln n)] and equals 1/sqrt(pi) at n = 2.
#[test]
fn independent_maxima_bracket_on_stars() {
    let mut pass = true;
    let mut detail = String::new();
    for leaves in [2u32, 16, 256] {
        let cfg = SimConfig {
            tree: TreeSpec::Star { leaves },
            weights: level(
                LevelSeq::Array { values: vec![0.0, 1.0] },
                LevelSeq::Constant { c: 1.0 },
            ),
            replicas: 100_000,
            seed: 0x5EED,
            depths: Vec::new(),
            statistic: Statistic::MaxBelowRoot,
            keep_raw: false,
        };
        let est = estimate_esup(&cfg).unwrap();
        let row = &est.rows[0];
        let slack = 3.0 * row.stderr;
        let lo = independent_max_lower(u64::from(leaves), 1.0);
        let hi = max_upper(u64::from(leaves), 1.0);
        let inside = row.mean >= lo - slack && row.mean <= hi + slack;
        pass &= inside;
        if leaves == 2 {
            pass &= (row.mean - EMAX_TWO_NORMALS).abs() <= slack;
        }
        detail.push_str(&format!(
            "n={leaves}: {lo:.3} <= {:.3} <= {hi:.3}; ",
            row.mean
        ));
    }
    detail.push_str(&format!("n=2 target {EMAX_TWO_NORMALS:.4} within 3 stderr"));
    assert!(report("independent_maxima_bracket", pass, &detail));
}

// Criterion 7: the verdict engine classifies the reference pair and the
// geometric corpus with scales straddling the energy boundary, and the
// windowed energy functional brackets the full one.
#[test]
fn verdict_corpus_and_energy_sandwich() {
    let mut systems: Vec<(WeightSystem, Classification)> = vec![
        (
            level(LevelSeq::Constant { c: 1.0 }, LevelSeq::Power { gamma: 1.0 }),
            Classification::Bounded,
        ),
        (
            level(LevelSeq::Power { gamma: 1.0 }, LevelSeq::Constant { c: 1.0 }),
            Classification::Unbounded,
        ),
    ];
    for b in [-0.75, 0.0, 0.5] {
        for delta in [-0.1, 0.1] {
            let expected = if delta < 0.0 {
                Classification::Bounded
            } else {
                Classification::Unbounded
            };
            systems.push((
                level(
                    LevelSeq::PowerGeometric { b, q: 2.0 },
                    LevelSeq::PowerGeometric { b: -(0.5 + b) + delta, q: 0.5 },
                ),
                expected,
            ));
        }
    }

    let mut verdict_errors = 0u32;
    let mut sandwich_errors = 0u32;
    let mut sandwich_checks = 0u32;
    for (w, expected) in &systems {
        let v = combined_verdict(w, DEFAULT_TRUNCATION).unwrap();
        if v.classification != *expected {
            verdict_errors += 1;
        }

        let g1 = eval_g1(w, G1_TRUNCATION_CAP).unwrap();
        let g2 = eval_g2(w, G1_TRUNCATION_CAP).unwrap();
        sandwich_checks += 1;
        if g1.ln_value > g2.ln_value + 1e-9 {
            sandwich_errors += 1;
        }
        let (alpha, _) = w.level_seqs().unwrap();
        let non_decreasing = (0..2000).all(|k| alpha.value(k) <= alpha.value(k + 1) + 1e-15);
        if non_decreasing && g2.ln_value > g1.ln_value + std::f64::consts::LN_2 + 1e-9 {
            sandwich_errors += 1;
        }
    }

    let pass = verdict_errors == 0 && sandwich_errors == 0;
    assert!(report(
        "verdict_corpus",
        pass,
        &format!(
            "{verdict_errors} misclassifications in {} systems; {sandwich_errors} energy sandwich violations in {sandwich_checks} checks",
            systems.len()
        ),
    ));
}

// Criterion 8: folding the scale into the increments preserves the field
// on every branch but flips this system from bounded to unbounded.
#[test]
fn scale_transfer_flips_the_verdict() {
    let w = level(
        LevelSeq::PowerGeometric { b: -0.75, q: 2.0 },
        LevelSeq::Geometric { q: 0.5 },
    );
    let original = combined_verdict(&w, DEFAULT_TRUNCATION).unwrap();
    let folded = product_weight_transfer(&w).unwrap();
    let transferred = combined_verdict(&folded, DEFAULT_TRUNCATION).unwrap();

    let pass = original.classification == Classification::Bounded
        && original.rule == Some(Rule::EnergyBounded)
        && transferred.classification == Classification::Unbounded
        && transferred.rule == Some(Rule::PartialSumDiverges);
    assert!(report(
        "scale_transfer_flip",
        pass,
        &format!(
            "original {:?}/{:?}, transferred {:?}/{:?}",
            original.classification, original.rule, transferred.classification, transferred.rule
        ),
    ));
}

// Criterion 9: on the polynomial chain the scaled entropies
// eps^2 log N stay within factor 8 between the two metrics while the raw
// covering ratio grows by at least 4x toward small radii.
#[test]
fn metric_equivalence_scales_entropy_not_counts() {
    let tree = Tree::chain(3_000);
    let w = level(
        LevelSeq::PowerK { gamma: 2.0, at0: 1.0 },
        LevelSeq::PowerK { gamma: 1.0, at0: 1.0 },
    );
    let wt = WeightedTree::new(&tree, &w).unwrap();
    let grid = geometric_grid(1.0, 3e-4, 16).unwrap();
    let report_eq = entropy_equivalence_report(&wt, &grid).unwrap();

    let mut worst_factor = 1.0f64;
    for r in &report_eq.rows {
        if r.n_d > 1 && r.n_dx > 1 {
            worst_factor = worst_factor
                .max(r.scaled_log_d / r.scaled_log_dx)
                .max(r.scaled_log_dx / r.scaled_log_d);
        }
    }
    let first_ratio = report_eq.rows.first().unwrap().ratio;
    let last_ratio = report_eq.rows.last().unwrap().ratio;

    let pass = worst_factor <= 8.0 && last_ratio >= 4.0 * first_ratio;
    assert!(report(
        "metric_equivalence",
        pass,
        &format!(
            "scaled entropy factor {worst_factor:.2} <= 8; covering ratio grows {first_ratio:.2} -> {last_ratio:.2} (>= 4x)"
        ),
    ));
}

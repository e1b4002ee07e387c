//! Acceptance suite: one test per criterion, each printing a PASS line
//! with the measured numbers (visible with `--nocapture`).
//!
//! Quantitative bars run against synthetic cohorts with planted effects;
//! the generator's Monte-Carlo Bayes oracle provides the reference upper
//! bounds. Every tolerance is pinned here, not computed at run time.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use rayon::prelude::*;

use prognoses_core::cohort::{Cohort, ViewId};
use prognoses_core::evaluation::{
    bootstrap_ci, nested_cv, weighted_f1, AccessPhase, ExperimentConfig,
};
use prognoses_core::fusion::{
    cross_lung_expand, fuse_decisions, fuse_features, DecisionFusion, FeatureFusion, Fused,
    MissingViewPolicy,
};
use prognoses_core::learners::{
    fit, mlp_gradient, mlp_loss, ClassifierKind, ClassifierSpec, ForestModel, HyperParams,
    MlpParams, TreeModel, TreeNode,
};
use prognoses_core::rng::rng_from;
use prognoses_core::synthcohort::{bayes_f1, generate, GeneratorParams, OracleRepresentation};
use prognoses_core::temporal::{represent, DayPairPolicy, DayPairSample, TemporalMode, ViewKey};
use rand::Rng;

fn pass(criterion: u32, detail: &str) {
    println!("criterion {criterion} PASS: {detail}");
}

fn easy_cohort(seed: u64) -> Cohort {
    let (cohort, _) = generate(&GeneratorParams::easy_preset(seed)).expect("generate");
    cohort
}

fn trajectory_cohort(seed: u64) -> Cohort {
    let (cohort, _) = generate(&GeneratorParams::trajectory_preset(seed)).expect("generate");
    cohort
}

/// Criterion 1 — leakage audit over full nested runs, with the runtime
/// bound, per single-view config.
#[test]
fn acceptance_01_leakage_audit_and_runtime() {
    let cohort = easy_cohort(101);
    assert_eq!(cohort.outcomes().len(), 30);
    let mut timings = Vec::new();
    for kind in [
        ClassifierKind::DecisionTree,
        ClassifierKind::LinearSvm,
        ClassifierKind::RandomForest,
        ClassifierKind::Mlp,
    ] {
        let config = ExperimentConfig::single_view(ViewId::L3, kind, 77);
        let start = Instant::now();
        let report = nested_cv(&config, &cohort).expect("nested run");
        let elapsed = start.elapsed().as_secs_f64();
        assert!(
            report.audit_violations.is_empty(),
            "{kind:?}: audit violations {:?}",
            report.audit_violations
        );
        // Train/test patient sets disjoint in every outer iteration, and
        // outer-test patients first touched at prediction time.
        for fold in 0..report.fold_plan.k {
            let test: BTreeSet<String> =
                report.fold_plan.fold_patients(fold).into_iter().collect();
            for (f, phase, patient) in &report.audit.entries {
                if *f != fold {
                    continue;
                }
                match phase {
                    AccessPhase::OuterPredict => {
                        assert!(test.contains(patient), "{kind:?} fold {fold}: predicted train patient")
                    }
                    _ => assert!(
                        !test.contains(patient),
                        "{kind:?} fold {fold}: pre-prediction access to test patient {patient}"
                    ),
                }
            }
        }
        assert!(elapsed < 30.0, "{kind:?} single-view config took {elapsed:.1}s (>= 30s)");
        timings.push(format!("{:?} {:.1}s", kind, elapsed));
    }
    pass(1, &format!("clean audit on 4 single-view configs; runtimes {}", timings.join(", ")));
}

/// Independent brute-force weighted F1: explicit confusion counts and the
/// textbook per-class formula, kept separate from the library path.
fn brute_force_weighted_f1(y_true: &[bool], y_pred: &[bool]) -> f64 {
    let count = |t: bool, p: bool| {
        y_true
            .iter()
            .zip(y_pred)
            .filter(|(a, b)| **a == t && **b == p)
            .count() as f64
    };
    let mut weighted = 0.0;
    let n = y_true.len() as f64;
    for class in [true, false] {
        let tp = count(class, class);
        let fp = count(!class, class);
        let fn_ = count(class, !class);
        let support = y_true.iter().filter(|&&v| v == class).count() as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        weighted += support * f1 / n;
    }
    weighted
}

/// Criterion 2 — metric oracle agreement to 1e-12.
#[test]
fn acceptance_02_weighted_f1_matches_brute_force() {
    let mut rng = rng_from(202, &[]);
    let mut max_err: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=200);
        let y_true: Vec<bool> = (0..n).map(|_| rng.random_range(0.0..1.0) < 0.4).collect();
        let y_pred: Vec<bool> = (0..n).map(|_| rng.random_range(0.0..1.0) < 0.5).collect();
        let ours = weighted_f1(&y_true, &y_pred).expect("non-empty");
        let oracle = brute_force_weighted_f1(&y_true, &y_pred);
        max_err = max_err.max((ours - oracle).abs());
    }
    assert!(max_err < 1e-12, "max deviation {max_err}");
    pass(2, &format!("1000 random label vectors, max |Δ| = {max_err:.2e} < 1e-12"));
}

/// Criterion 3 — bootstrap determinism, degenerate cases, and Monte-Carlo
/// coverage 95% ± 3% at n=200 over 500 trials.
#[test]
fn acceptance_03_bootstrap_contract() {
    let metric = |t: &[bool], p: &[bool]| weighted_f1(t, p).expect("non-empty");

    let pairs: Vec<(bool, bool)> = (0..60).map(|i| (i % 3 == 0, i % 4 == 0)).collect();
    let a = bootstrap_ci(&pairs, metric, 2000, 31).unwrap();
    let b = bootstrap_ci(&pairs, metric, 2000, 31).unwrap();
    assert_eq!(a, b, "same seed must reproduce the CI bit-exactly");

    let correct: Vec<(bool, bool)> = (0..50).map(|i| (i % 2 == 0, i % 2 == 0)).collect();
    assert_eq!(bootstrap_ci(&correct, metric, 2000, 5).unwrap(), (1.0, 1.0));

    // Fixed generating process: prevalence 0.3, TPR 0.75, FPR 0.15.
    // Large-sample weighted F1 from the population confusion rates.
    let (prev, tpr, fpr) = (0.3, 0.75, 0.15);
    let population = {
        let (tp, fn_, fp, tn) = (prev * tpr, prev * (1.0 - tpr), (1.0 - prev) * fpr, (1.0 - prev) * (1.0 - fpr));
        let f1 = |tp: f64, fp: f64, fn_: f64| {
            let p = tp / (tp + fp);
            let r = tp / (tp + fn_);
            2.0 * p * r / (p + r)
        };
        prev * f1(tp, fp, fn_) + (1.0 - prev) * f1(tn, fn_, fp)
    };
    let mut rng = rng_from(424242, &[]);
    let trials = 500;
    let mut covered = 0;
    for trial in 0..trials {
        let pairs: Vec<(bool, bool)> = (0..200)
            .map(|_| {
                let y = rng.random_range(0.0..1.0) < prev;
                let rate = if y { tpr } else { fpr };
                (y, rng.random_range(0.0..1.0) < rate)
            })
            .collect();
        let (lo, hi) = bootstrap_ci(&pairs, metric, 2000, 9000 + trial).unwrap();
        assert!(lo <= hi);
        if lo <= population && population <= hi {
            covered += 1;
        }
    }
    let coverage = covered as f64 / trials as f64;
    assert!(
        (0.92..=0.98).contains(&coverage),
        "coverage {coverage} outside 95% ± 3%"
    );
    pass(3, &format!("deterministic CIs; all-correct -> (1,1); coverage {covered}/{trials} = {coverage:.3}"));
}

/// Criterion 4 — temporal identities.
#[test]
fn acceptance_04_temporal_identities() {
    let mut rng = rng_from(404, &[]);
    for _ in 0..200 {
        let n = rng.random_range(1..64);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1e6..1e6)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1e6..1e6)).collect();

        let self_diff = represent(&a, &a, TemporalMode::Difference).unwrap();
        assert!(self_diff.iter().all(|&x| x == 0.0), "identical days must give exact zero");

        let ab = represent(&a, &b, TemporalMode::Difference).unwrap();
        let ba = represent(&b, &a, TemporalMode::Difference).unwrap();
        for (x, y) in ab.iter().zip(&ba) {
            assert_eq!(*x, -*y, "anti-symmetry must hold bit-exactly");
        }

        let cat = represent(&a, &b, TemporalMode::Concatenate).unwrap();
        assert_eq!(&cat[..n], &a[..]);
        assert_eq!(&cat[n..], &b[..]);
    }
    pass(4, "zero self-difference, bit-exact anti-symmetry, concat round-trip on 200 random pairs");
}

/// Criterion 5 — fusion agrees with element-wise brute force; the
/// documented MaxVotes tie rule holds.
#[test]
fn acceptance_05_fusion_oracles() {
    let mut rng = rng_from(505, &[]);
    for _ in 0..100 {
        let dim = rng.random_range(1..16);
        let per_view: std::collections::BTreeMap<ViewId, Vec<f64>> = ViewId::ALL
            .iter()
            .map(|&v| {
                (v, (0..dim).map(|_| rng.random_range(-50.0..50.0)).collect::<Vec<f64>>())
            })
            .collect();
        // Brute force, written out element by element.
        let mut avg = vec![0.0; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        let mut cat = Vec::new();
        for v in ViewId::ALL {
            let vec = &per_view[&v];
            for (i, &x) in vec.iter().enumerate() {
                avg[i] += x / 6.0;
                if x > max[i] {
                    max[i] = x;
                }
            }
            cat.extend_from_slice(vec);
        }
        let got_avg = match fuse_features(&per_view, FeatureFusion::Average, MissingViewPolicy::Skip).unwrap() {
            Fused::Vector(v) => v,
            _ => panic!("skip"),
        };
        let got_max = match fuse_features(&per_view, FeatureFusion::Max, MissingViewPolicy::Skip).unwrap() {
            Fused::Vector(v) => v,
            _ => panic!("skip"),
        };
        let got_cat = match fuse_features(&per_view, FeatureFusion::Concatenate, MissingViewPolicy::Skip).unwrap() {
            Fused::Vector(v) => v,
            _ => panic!("skip"),
        };
        for (g, e) in got_avg.iter().zip(&avg) {
            assert!((g - e).abs() < 1e-12);
        }
        assert_eq!(got_max, max);
        assert_eq!(got_cat, cat);
    }

    let tie: std::collections::BTreeMap<ViewId, f64> = ViewId::ALL
        .iter()
        .copied()
        .zip([0.9, 0.9, 0.9, 0.1, 0.1, 0.1])
        .collect();
    let (label, fused) = fuse_decisions(&tie, DecisionFusion::MaxVotes, 0.5).unwrap();
    assert!(!label, "3-3 tie at mean 0.5 must resolve to the negative class");
    assert_eq!(fused, 0.5);
    pass(5, "average/max/concatenate match brute force on 100 random view sets; tie rule holds");
}

/// Criterion 6 — cross-lung pooling expands training only.
#[test]
fn acceptance_06_cross_lung_contract() {
    // Unit-level: training-set size is |view| + |mirror|.
    let mut samples = Vec::new();
    for i in 0..23 {
        for view in [ViewId::L3, ViewId::R3, ViewId::L1] {
            samples.push(DayPairSample {
                patient_id: format!("P{i:03}"),
                view: ViewKey::Single(view),
                day_a: 1,
                day_b: 2,
                vector: vec![i as f64, 1.0],
                label: i % 3 == 0,
            });
        }
    }
    let expanded = cross_lung_expand(&samples, ViewId::L3, true).unwrap();
    assert_eq!(expanded.len(), 46, "|L3| + |R3| = 23 + 23");
    let unexpanded = cross_lung_expand(&samples, ViewId::L3, false).unwrap();
    assert_eq!(unexpanded.len(), 23);

    // Run-level: evaluation multiset identical with pooling on vs off.
    let cohort = easy_cohort(606);
    let mut base = ExperimentConfig::single_view(ViewId::L3, ClassifierKind::LinearSvm, 42);
    base.bootstrap_iters = 200;
    let mut pooled_config = base.clone();
    pooled_config.cross_lung = true;
    let off = nested_cv(&base, &cohort).unwrap();
    let on = nested_cv(&pooled_config, &cohort).unwrap();
    assert_eq!(
        off.eval_fingerprint, on.eval_fingerprint,
        "pooling must never touch evaluation data"
    );
    // Training sets doubled per fold (complete synthetic cohort: every
    // patient has both views).
    for (a, b) in off.per_fold.iter().zip(&on.per_fold) {
        assert_eq!(2 * a.n_train_samples, b.n_train_samples, "fold {}", a.fold);
    }
    pass(6, &format!(
        "training sets doubled ({} -> {} samples in fold 0); evaluation multiset identical",
        off.per_fold[0].n_train_samples, on.per_fold[0].n_train_samples
    ));
}

/// Criterion 7 — learner sanity set.
#[test]
fn acceptance_07_learner_sanity() {
    // Linearly separable blobs with a 2-sigma gap along x0.
    let blobs = |n: usize, stream: u64| -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = rng_from(707, &[stream]);
        (0..n)
            .map(|i| {
                let label = i % 2 == 0;
                let x0 = if label { rng.random_range(1.0..3.0) } else { rng.random_range(-3.0..-1.0) };
                (vec![x0, rng.random_range(-1.0..1.0)], label)
            })
            .unzip()
    };
    let xor = |n: usize, stream: u64| -> (Vec<Vec<f64>>, Vec<bool>) {
        let centers = [([0.0, 0.0], false), ([1.0, 1.0], false), ([0.0, 1.0], true), ([1.0, 0.0], true)];
        let mut rng = rng_from(708, &[stream]);
        (0..n)
            .map(|i| {
                let (c, label) = centers[i % 4];
                (
                    vec![c[0] + rng.random_range(-0.15..0.15), c[1] + rng.random_range(-0.15..0.15)],
                    label,
                )
            })
            .unzip()
    };
    let accuracy = |pred: &[bool], truth: &[bool]| {
        pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
    };

    let (bx, by) = blobs(100, 1);
    let tree_spec = ClassifierSpec::new(
        ClassifierKind::DecisionTree,
        HyperParams::Tree { max_depth: 1, min_samples_leaf: 1 },
        0,
    );
    let tree = fit(&tree_spec, &bx, &by).unwrap();
    let tree_acc = accuracy(&tree.predict(&bx).unwrap(), &by);
    assert_eq!(tree_acc, 1.0, "tree must reach zero training error on separable blobs");

    let (xt, yt) = xor(200, 2);
    let (xv, yv) = xor(80, 3);
    let mlp_spec = ClassifierSpec::new(
        ClassifierKind::Mlp,
        HyperParams::Mlp { learning_rate: 1e-2, l2: 0.0, class_weighted: false },
        7,
    );
    let mlp = fit(&mlp_spec, &xt, &yt).unwrap();
    let mlp_acc = accuracy(&mlp.predict(&xv).unwrap(), &yv);
    assert!(mlp_acc >= 0.95, "MLP XOR accuracy {mlp_acc}");

    let svm_spec = ClassifierSpec::new(
        ClassifierKind::LinearSvm,
        HyperParams::Svm { lambda: 1e-2, class_weighted: false },
        3,
    );
    let svm_xor = fit(&svm_spec, &xt, &yt).unwrap();
    let svm_xor_acc = accuracy(&svm_xor.predict(&xv).unwrap(), &yv);
    assert!(
        (0.4..=0.6).contains(&svm_xor_acc),
        "linear SVM XOR accuracy {svm_xor_acc} should be chance-level"
    );
    let svm_blobs = fit(&svm_spec, &bx, &by).unwrap();
    let svm_blob_acc = accuracy(&svm_blobs.predict(&bx).unwrap(), &by);
    assert!(svm_blob_acc >= 0.95, "linear SVM separable accuracy {svm_blob_acc}");

    // Analytic gradient vs central finite differences (h = 1e-5).
    let params = MlpParams::init(4, &[8], 99);
    let mut rng = rng_from(709, &[]);
    let gx: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..4).map(|_| rng.random_range(-1.5..1.5)).collect())
        .collect();
    let gy = vec![true, false, true, true, false];
    let gw = vec![1.0; 5];
    let analytic = mlp_gradient(&params, &gx, &gy, &gw, 1e-3).to_flat();
    let flat = params.to_flat();
    let mut max_rel: f64 = 0.0;
    for k in 0..flat.len() {
        let h = 1e-5;
        let mut plus = flat.clone();
        plus[k] += h;
        let mut minus = flat.clone();
        minus[k] -= h;
        let numeric = (mlp_loss(&params.from_flat(&plus), &gx, &gy, &gw, 1e-3)
            - mlp_loss(&params.from_flat(&minus), &gx, &gy, &gw, 1e-3))
            / (2.0 * h);
        let rel = (analytic[k] - numeric).abs() / (analytic[k].abs() + numeric.abs()).max(1e-8);
        max_rel = max_rel.max(rel);
    }
    assert!(max_rel < 1e-4, "gradient check max relative error {max_rel}");
    pass(7, &format!(
        "tree 1.00 on blobs; MLP XOR {mlp_acc:.3}; SVM XOR {svm_xor_acc:.3}, blobs {svm_blob_acc:.3}; gradient max rel err {max_rel:.2e}"
    ));
}

/// Criterion 8 — planted-effect recovery: view dominance, temporal
/// difference, and the fusion heatmap, with the Bayes oracle confirming
/// the preset and the whole grid under the time bound.
#[test]
fn acceptance_08_planted_effect_recovery() {
    let start = Instant::now();

    // (a) Posterior-view dominance on the easy preset, 20 seeds.
    let view_wins: usize = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let cohort = easy_cohort(1000 + seed);
            let f1_of = |view: ViewId| {
                let mut c = ExperimentConfig::single_view(view, ClassifierKind::LinearSvm, 500 + seed);
                c.bootstrap_iters = 50;
                nested_cv(&c, &cohort).unwrap().weighted_f1
            };
            usize::from(f1_of(ViewId::L3) > f1_of(ViewId::L1))
        })
        .sum();
    assert!(view_wins >= 18, "F1(L3) > F1(L1) in only {view_wins}/20 seeds");

    // (b) Temporal difference beats temporal concatenation on the μ=0
    // trajectory preset, 20 seeds.
    let temporal_wins: usize = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let cohort = trajectory_cohort(2000 + seed);
            let f1_of = |mode: TemporalMode| {
                let mut c = ExperimentConfig::all_views(
                    FeatureFusion::Concatenate,
                    ClassifierKind::LinearSvm,
                    700 + seed,
                );
                c.temporal = mode;
                c.day_policy = DayPairPolicy::AllSequentialPairs;
                c.bootstrap_iters = 50;
                nested_cv(&c, &cohort).unwrap().weighted_f1
            };
            usize::from(f1_of(TemporalMode::Difference) > f1_of(TemporalMode::Concatenate))
        })
        .sum();
    assert!(temporal_wins >= 18, "F1(diff) > F1(concat) in only {temporal_wins}/20 seeds");

    // (c) Fusion-by-temporal heatmap: the (concatenate, difference) cell
    // is the grid maximum and clears 0.85.
    let cohort = trajectory_cohort(4000);
    let cohort = &cohort;
    let cells: Vec<((String, String), f64)> = [
        ("avg_features", None, Some(FeatureFusion::Average)),
        ("avg_proba", Some(DecisionFusion::AverageProba), None),
        ("concatenate", None, Some(FeatureFusion::Concatenate)),
        ("max_features", None, Some(FeatureFusion::Max)),
        ("max_votes", Some(DecisionFusion::MaxVotes), None),
    ]
    .into_par_iter()
    .flat_map(|(row, decision, feature)| {
        [(TemporalMode::Concatenate, "concatenate"), (TemporalMode::Difference, "difference")]
            .into_par_iter()
            .map(move |(mode, col)| {
                let mut c = match (feature, decision) {
                    (Some(f), None) => {
                        ExperimentConfig::all_views(f, ClassifierKind::LinearSvm, 800)
                    }
                    (None, Some(d)) => {
                        ExperimentConfig::all_views_decision(d, ClassifierKind::LinearSvm, 800)
                    }
                    _ => unreachable!(),
                };
                c.temporal = mode;
                c.day_policy = DayPairPolicy::AllSequentialPairs;
                c.bootstrap_iters = 50;
                let f1 = nested_cv(&c, cohort).unwrap().weighted_f1;
                ((row.to_string(), col.to_string()), f1)
            })
    })
    .collect();
    let (max_key, max_f1) = cells
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, v)| (k.clone(), *v))
        .unwrap();
    assert_eq!(
        max_key,
        ("concatenate".to_string(), "difference".to_string()),
        "heatmap maximum is not the concatenation/difference cell: {cells:?}"
    );
    assert!(max_f1 >= 0.85, "max cell F1 {max_f1} < 0.85");

    // Bayes oracle confirms the preset supports those bars.
    let bayes = bayes_f1(
        &GeneratorParams::trajectory_preset(4000),
        &OracleRepresentation::AllViewsConcat { mode: TemporalMode::Difference, day_a: 1, day_b: 2 },
        100_000,
    )
    .unwrap();
    assert!(bayes >= 0.95, "trajectory preset Bayes F1 {bayes} < 0.95");
    let bayes_easy = bayes_f1(
        &GeneratorParams::easy_preset(1000),
        &OracleRepresentation::AllViewsConcat { mode: TemporalMode::Difference, day_a: 1, day_b: 2 },
        100_000,
    )
    .unwrap();
    assert!(bayes_easy >= 0.95, "easy preset Bayes F1 {bayes_easy} < 0.95");

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "planted-effect grid took {elapsed:.0}s (>= 5 min)");
    pass(8, &format!(
        "view dominance {view_wins}/20; temporal difference {temporal_wins}/20; heatmap max (concatenate,difference) = {max_f1:.3}; Bayes {bayes:.3}/{bayes_easy:.3}; grid {elapsed:.0}s"
    ));
}

/// Criterion 9 — importance pipeline against hand enumeration.
#[test]
fn acceptance_09_importance_oracle() {
    use prognoses_core::importance::{export_radar, profile, read_radar, split_counts_mode, BiomarkerGrouping, CountMode};

    let stump = |feature: usize| TreeModel {
        nodes: vec![
            TreeNode::Split { feature, threshold: 0.5, left: 1, right: 2, n_node: 10, impurity_decrease: 0.3 },
            TreeNode::Leaf { pos: 0, total: 6 },
            TreeNode::Leaf { pos: 4, total: 4 },
        ],
    };
    let deep = TreeModel {
        nodes: vec![
            TreeNode::Split { feature: 2, threshold: 0.0, left: 1, right: 2, n_node: 12, impurity_decrease: 0.2 },
            TreeNode::Split { feature: 9, threshold: 1.0, left: 3, right: 4, n_node: 7, impurity_decrease: 0.1 },
            TreeNode::Leaf { pos: 1, total: 5 },
            TreeNode::Leaf { pos: 0, total: 4 },
            TreeNode::Leaf { pos: 3, total: 3 },
        ],
    };
    let forest = ForestModel { trees: vec![stump(2), stump(7), deep], mtry: 6, n_features: 38 };
    // Hand count: feature 2 -> stump + deep root = 2; feature 7 -> 1;
    // feature 9 -> 1; total internal nodes 4.
    let counts = split_counts_mode(&forest, CountMode::SplitNodes);
    assert_eq!(counts[2], 2.0);
    assert_eq!(counts[7], 1.0);
    assert_eq!(counts[9], 1.0);
    assert_eq!(counts.iter().sum::<f64>(), 4.0);

    let grouping = BiomarkerGrouping::placeholder();
    let fold_counts = vec![counts.clone(), counts.iter().map(|c| c * 2.0).collect()];
    let total: f64 = fold_counts.iter().flatten().sum();
    let prof = profile(&fold_counts, &grouping).unwrap();
    let group_sum: f64 = prof.groups.iter().map(|(_, v)| v).sum();
    assert!(
        (group_sum * fold_counts.len() as f64 - total).abs() < 1e-9,
        "group totals must conserve split counts"
    );

    let dir = tempfile::tempdir().unwrap();
    let radar = dir.path().join("radar.csv");
    export_radar(&prof, &radar).unwrap();
    let back = read_radar(&radar).unwrap();
    let max_norm = back.normalized().iter().map(|(_, v)| *v).fold(0.0, f64::max);
    assert_eq!(max_norm, 1.0, "normalized maximum must be exactly 1.0");
    pass(9, &format!(
        "hand-enumerated counts match; conservation holds (total {total}); radar max normalized = 1.0"
    ));
}

// ---------------------------------------------------------------------------
// CLI-level fixtures shared by criteria 10/11
// ---------------------------------------------------------------------------

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_prognoses")
}

struct AblateArtifacts {
    dir: tempfile::TempDir,
}

impl AblateArtifacts {
    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join("exhibits").join(name)
    }
}

fn run_cli(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .env_remove("PROGNOSES_SEED")
        .output()
        .expect("spawn prognoses")
}

fn synth_preset(dir: &Path, preset: &str, seed: u64) {
    std::fs::write(
        dir.join("synth.toml"),
        format!("preset = \"{preset}\"\nseed = {seed}\n"),
    )
    .unwrap();
    let out = run_cli(&["synth", "--config", "synth.toml", "--out", "cohort"], dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

const ABLATE_CONFIG: &str = r#"
seed = 808
classifier = "svm"

[data]
features = "cohort/features.jsonl"
labels = "cohort/labels.csv"
source = "biomarker"

[ablate]
exhibits = ["table1", "fig3", "fig5"]
bootstrap_iters = 2000
"#;

fn ablate_fixture() -> &'static AblateArtifacts {
    static FIXTURE: OnceLock<AblateArtifacts> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let dir = tempfile::tempdir().expect("tempdir");
        synth_preset(dir.path(), "easy", 1200);
        std::fs::write(dir.path().join("ablate.toml"), ABLATE_CONFIG).unwrap();
        let out = run_cli(
            &["ablate", "--config", "ablate.toml", "--out", "exhibits", "--jobs", "2"],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        AblateArtifacts { dir }
    })
}

/// Criterion 10 — cmd_ablate is byte-identical across --jobs values.
#[test]
fn acceptance_10_jobs_determinism() {
    let dir = tempfile::tempdir().unwrap();
    synth_preset(dir.path(), "trajectory", 4000);
    let config = ABLATE_CONFIG
        .replace("classifier = \"svm\"", "classifier = \"decision_tree\"")
        .replace("bootstrap_iters = 2000", "day_policy = \"all_sequential\"\nbootstrap_iters = 2000")
        .replace("[\"table1\", \"fig3\", \"fig5\"]", "[\"fig3\", \"fig5\"]");
    std::fs::write(dir.path().join("ablate.toml"), config).unwrap();
    for (out_dir, jobs) in [("j1", "1"), ("j2", "2"), ("j2b", "2")] {
        let out = run_cli(
            &["ablate", "--config", "ablate.toml", "--out", out_dir, "--jobs", jobs],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["fig3_fusion_heatmap.csv", "fig3_fusion_heatmap.txt", "fig5_crosslung_bars.csv"] {
        let a = std::fs::read(dir.path().join("j1").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("j2").join(file)).unwrap();
        let c = std::fs::read(dir.path().join("j2b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between --jobs 1 and --jobs 2");
        assert_eq!(b, c, "{file} differs between identical reruns");
    }
    pass(10, "fig3/fig5 outputs byte-identical across --jobs 1, --jobs 2, and reruns");
}

/// Criterion 11 — exhibit shapes match the source layouts exactly:
/// 7x5 view-by-classifier table, 5x2 fusion heatmap, 7-row cross-lung
/// table.
#[test]
fn acceptance_11_exhibit_shapes() {
    let fixture = ablate_fixture();

    let table1 = std::fs::read_to_string(fixture.out("table1_view_classifier.csv")).unwrap();
    let mut rows = table1.lines();
    let header: Vec<&str> = rows.next().unwrap().split(',').collect();
    assert_eq!(
        header,
        vec!["view", "Decision-Tree", "Random-Forest", "SVM", "MLP", "MLP-Large"],
        "table1 must have 5 classifier columns"
    );
    let body: Vec<&str> = rows.collect();
    assert_eq!(body.len(), 7, "table1 must have 6 views + All Views");
    assert!(body[0].starts_with("Left-1,"));
    assert!(body[6].starts_with("All Views,"));
    for line in &body {
        // Quoted cells: "0.80 [0.62–0.96]"
        let cells = line.split(',').count();
        assert!(cells >= 6, "table1 row too short: {line}");
    }

    let fig3 = std::fs::read_to_string(fixture.out("fig3_fusion_heatmap.csv")).unwrap();
    let lines: Vec<&str> = fig3.lines().collect();
    assert_eq!(lines[0], "fusion,concatenate,difference");
    assert_eq!(lines.len(), 6, "5 fusion rows");
    let mut cell_count = 0;
    for line in &lines[1..] {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 3);
        for value in &cells[1..] {
            let f1: f64 = value.parse().expect("numeric heatmap cell");
            assert!((0.0..=1.0).contains(&f1));
            cell_count += 1;
        }
    }
    assert_eq!(cell_count, 10, "heatmap must hold exactly 10 data cells");

    let fig5 = std::fs::read_to_string(fixture.out("fig5_crosslung_bars.csv")).unwrap();
    let lines: Vec<&str> = fig5.lines().collect();
    assert_eq!(lines.len(), 8, "header + 7 rows (6 views + All Views)");
    assert!(lines[0].starts_with("view,no_pool"));
    assert!(lines[7].starts_with("All Views,"));

    pass(11, "table1 is 7x5, fig3 is 5x2, fig5 has 7 rows");
}

//! Deterministic from-scratch binary classifiers with probability outputs
//! and a shared fit/predict contract: CART decision tree, random forest,
//! linear SVM with logistic calibration, and two MLP variants.
//!
//! All learners consume standardized features; the standardizer is fit on
//! the training data only and travels with the model. Refitting with the
//! same data, hyperparameters, and seed reproduces bit-identical
//! parameters.

mod forest;
mod mlp;
mod standardize;
mod svm;
mod tree;

pub use forest::ForestModel;
pub use mlp::{mlp_gradient, mlp_loss, MlpGrads, MlpModel, MlpParams};
pub use standardize::Standardizer;
pub use svm::SvmModel;
pub use tree::{TreeModel, TreeNode};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The five trainable classifier families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassifierKind {
    DecisionTree,
    RandomForest,
    LinearSvm,
    Mlp,
    MlpLarge,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 5] = [
        ClassifierKind::DecisionTree,
        ClassifierKind::RandomForest,
        ClassifierKind::LinearSvm,
        ClassifierKind::Mlp,
        ClassifierKind::MlpLarge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::DecisionTree => "decision_tree",
            ClassifierKind::RandomForest => "random_forest",
            ClassifierKind::LinearSvm => "svm",
            ClassifierKind::Mlp => "mlp",
            ClassifierKind::MlpLarge => "mlp_large",
        }
    }

    pub fn parse(s: &str) -> Option<ClassifierKind> {
        match s {
            "decision_tree" => Some(ClassifierKind::DecisionTree),
            "random_forest" => Some(ClassifierKind::RandomForest),
            "svm" => Some(ClassifierKind::LinearSvm),
            "mlp" => Some(ClassifierKind::Mlp),
            "mlp_large" => Some(ClassifierKind::MlpLarge),
            _ => None,
        }
    }

    /// Column header used in the exhibit tables.
    pub fn table_label(self) -> &'static str {
        match self {
            ClassifierKind::DecisionTree => "Decision-Tree",
            ClassifierKind::RandomForest => "Random-Forest",
            ClassifierKind::LinearSvm => "SVM",
            ClassifierKind::Mlp => "MLP",
            ClassifierKind::MlpLarge => "MLP-Large",
        }
    }
}

/// One point in a classifier's hyperparameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HyperParams {
    Tree { max_depth: usize, min_samples_leaf: usize },
    Forest { n_trees: usize, min_samples_leaf: usize },
    Svm { lambda: f64, class_weighted: bool },
    Mlp { learning_rate: f64, l2: f64, class_weighted: bool },
}

impl HyperParams {
    /// Short deterministic rendering for reports.
    pub fn describe(&self) -> String {
        match self {
            HyperParams::Tree { max_depth, min_samples_leaf } => {
                format!("max_depth={max_depth} min_leaf={min_samples_leaf}")
            }
            HyperParams::Forest { n_trees, min_samples_leaf } => {
                format!("trees={n_trees} min_leaf={min_samples_leaf}")
            }
            HyperParams::Svm { lambda, class_weighted } => {
                format!("lambda={lambda} class_weighted={class_weighted}")
            }
            HyperParams::Mlp { learning_rate, l2, class_weighted } => {
                format!("lr={learning_rate} l2={l2} class_weighted={class_weighted}")
            }
        }
    }
}

/// Canonical hyperparameter grid for a classifier kind, in tie-break
/// order (earlier entries win inner-selection ties).
pub fn default_grid(kind: ClassifierKind, class_weight_axis: bool) -> Vec<HyperParams> {
    let mut grid = Vec::new();
    match kind {
        ClassifierKind::DecisionTree => {
            for max_depth in [2usize, 4, 8] {
                for min_samples_leaf in [1usize, 3, 5] {
                    grid.push(HyperParams::Tree { max_depth, min_samples_leaf });
                }
            }
        }
        ClassifierKind::RandomForest => {
            for n_trees in [100usize, 300] {
                for min_samples_leaf in [1usize, 3] {
                    grid.push(HyperParams::Forest { n_trees, min_samples_leaf });
                }
            }
        }
        ClassifierKind::LinearSvm => {
            let weight_options: &[bool] = if class_weight_axis { &[false, true] } else { &[false] };
            for lambda in [1e-3, 1e-2, 1e-1] {
                for &class_weighted in weight_options {
                    grid.push(HyperParams::Svm { lambda, class_weighted });
                }
            }
        }
        ClassifierKind::Mlp | ClassifierKind::MlpLarge => {
            let weight_options: &[bool] = if class_weight_axis { &[false, true] } else { &[false] };
            for learning_rate in [1e-3, 1e-2] {
                for l2 in [0.0, 1e-4] {
                    for &class_weighted in weight_options {
                        grid.push(HyperParams::Mlp { learning_rate, l2, class_weighted });
                    }
                }
            }
        }
    }
    grid
}

/// Full specification of one fit: family, grid point, and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub params: HyperParams,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind, params: HyperParams, seed: u64) -> ClassifierSpec {
        ClassifierSpec { kind, params, seed }
    }
}

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("training requires at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("degenerate training labels")]
    SingleClass,
    #[error("training matrix contains a non-finite value")]
    NonFinite,
    #[error("inconsistent feature dimensions in training matrix")]
    RaggedMatrix,
    #[error("input dimension {got} does not match training dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("hyperparameters do not match classifier kind")]
    ParamKindMismatch,
    #[error("model is not a random forest")]
    NotAForest,
}

/// Learned parameters of one classifier family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    Tree(TreeModel),
    Forest(ForestModel),
    Svm(SvmModel),
    Mlp(MlpModel),
}

/// A fitted model: spec, standardizer, and learned parameters.
/// Immutable after fit; shareable read-only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ClassifierSpec,
    pub standardizer: Standardizer,
    pub model: ModelParams,
}

/// Per-sample weights: inverse class frequency n/(2·n_class) when enabled,
/// uniform 1.0 otherwise.
fn sample_weights(y: &[bool], class_weighted: bool) -> Vec<f64> {
    if !class_weighted {
        return vec![1.0; y.len()];
    }
    let n = y.len() as f64;
    let n_pos = y.iter().filter(|&&v| v).count() as f64;
    let n_neg = n - n_pos;
    y.iter()
        .map(|&v| if v { n / (2.0 * n_pos) } else { n / (2.0 * n_neg) })
        .collect()
}

fn validate_training(x: &[Vec<f64>], y: &[bool]) -> Result<usize, LearnError> {
    if x.len() < 2 {
        return Err(LearnError::TooFewSamples(x.len()));
    }
    if x.len() != y.len() {
        return Err(LearnError::RaggedMatrix);
    }
    let dim = x[0].len();
    if x.iter().any(|row| row.len() != dim) {
        return Err(LearnError::RaggedMatrix);
    }
    if x.iter().any(|row| row.iter().any(|v| !v.is_finite())) {
        return Err(LearnError::NonFinite);
    }
    let n_pos = y.iter().filter(|&&v| v).count();
    if n_pos == 0 || n_pos == y.len() {
        return Err(LearnError::SingleClass);
    }
    Ok(dim)
}

/// Trains a classifier. Standardization statistics come from `x` only.
pub fn fit(spec: &ClassifierSpec, x: &[Vec<f64>], y: &[bool]) -> Result<TrainedModel, LearnError> {
    validate_training(x, y)?;
    let standardizer = Standardizer::fit(x);
    let xs = standardizer.transform(x);
    let model = match (spec.kind, &spec.params) {
        (ClassifierKind::DecisionTree, HyperParams::Tree { max_depth, min_samples_leaf }) => {
            ModelParams::Tree(tree::fit_tree(&xs, y, *max_depth, *min_samples_leaf))
        }
        (ClassifierKind::RandomForest, HyperParams::Forest { n_trees, min_samples_leaf }) => {
            ModelParams::Forest(forest::fit_forest(
                &xs,
                y,
                *n_trees,
                *min_samples_leaf,
                spec.seed,
            ))
        }
        (ClassifierKind::LinearSvm, HyperParams::Svm { lambda, class_weighted }) => {
            let weights = sample_weights(y, *class_weighted);
            ModelParams::Svm(svm::fit_svm(&xs, y, &weights, *lambda))
        }
        (
            ClassifierKind::Mlp | ClassifierKind::MlpLarge,
            HyperParams::Mlp { learning_rate, l2, class_weighted },
        ) => {
            let weights = sample_weights(y, *class_weighted);
            let hidden: &[usize] = if spec.kind == ClassifierKind::Mlp {
                &[64]
            } else {
                &[256, 64]
            };
            ModelParams::Mlp(mlp::fit_mlp(
                &xs,
                y,
                &weights,
                hidden,
                *learning_rate,
                *l2,
                spec.seed,
            ))
        }
        _ => return Err(LearnError::ParamKindMismatch),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        standardizer,
        model,
    })
}

impl TrainedModel {
    /// Positive-class probability for each row of `x`.
    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<f64>, LearnError> {
        let expected = self.standardizer.dim();
        for row in x {
            if row.len() != expected {
                return Err(LearnError::DimensionMismatch {
                    expected,
                    got: row.len(),
                });
            }
        }
        let xs = self.standardizer.transform(x);
        Ok(match &self.model {
            ModelParams::Tree(t) => xs.iter().map(|row| t.predict_proba(row)).collect(),
            ModelParams::Forest(f) => xs.iter().map(|row| f.predict_proba(row)).collect(),
            ModelParams::Svm(s) => xs.iter().map(|row| s.predict_proba(row)).collect(),
            ModelParams::Mlp(m) => xs.iter().map(|row| m.predict_proba(row)).collect(),
        })
    }

    /// Thresholded labels at 0.5.
    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<bool>, LearnError> {
        Ok(self.predict_proba(x)?.into_iter().map(|p| p >= 0.5).collect())
    }

    /// Self-describing JSON document for archival and reuse.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<TrainedModel, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Access forest internals (importance analysis).
    pub fn as_forest(&self) -> Result<&ForestModel, LearnError> {
        match &self.model {
            ModelParams::Forest(f) => Ok(f),
            _ => Err(LearnError::NotAForest),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use rand::Rng;

    /// Linearly separable 2-d blobs with a hard margin along x0.
    /// Class 0 lives in x0 ∈ [-3,-1], class 1 in x0 ∈ [1,3]; with unit
    /// scale that is a 2σ-wide gap.
    pub(crate) fn separable_blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = rng_from(seed, &[1]);
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let label = i % 2 == 1;
            let x0 = if label {
                rng.random_range(1.0..3.0)
            } else {
                rng.random_range(-3.0..-1.0)
            };
            let x1: f64 = rng.random_range(-1.0..1.0);
            x.push(vec![x0, x1]);
            y.push(label);
        }
        (x, y)
    }

    /// Four Gaussian-ish clusters in XOR arrangement.
    pub(crate) fn xor_clusters(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = rng_from(seed, &[2]);
        let centers = [
            ([0.0, 0.0], false),
            ([1.0, 1.0], false),
            ([0.0, 1.0], true),
            ([1.0, 0.0], true),
        ];
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let (c, label) = centers[i % 4];
            x.push(vec![
                c[0] + rng.random_range(-0.15..0.15),
                c[1] + rng.random_range(-0.15..0.15),
            ]);
            y.push(label);
        }
        (x, y)
    }

    fn accuracy(pred: &[bool], truth: &[bool]) -> f64 {
        let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
        hits as f64 / truth.len() as f64
    }

    fn spec_for(kind: ClassifierKind, seed: u64) -> ClassifierSpec {
        let params = default_grid(kind, false)[0].clone();
        ClassifierSpec::new(kind, params, seed)
    }

    #[test]
    fn tree_reaches_zero_training_error_on_separable_blobs() {
        let (x, y) = separable_blobs(100, 11);
        for max_depth in [1usize, 2, 8] {
            let spec = ClassifierSpec::new(
                ClassifierKind::DecisionTree,
                HyperParams::Tree { max_depth, min_samples_leaf: 1 },
                0,
            );
            let model = fit(&spec, &x, &y).unwrap();
            let pred = model.predict(&x).unwrap();
            assert_eq!(accuracy(&pred, &y), 1.0, "depth {max_depth}");
        }
    }

    #[test]
    fn mlp_learns_xor() {
        let (x_train, y_train) = xor_clusters(200, 21);
        let (x_test, y_test) = xor_clusters(80, 22);
        let spec = ClassifierSpec::new(
            ClassifierKind::Mlp,
            HyperParams::Mlp { learning_rate: 1e-2, l2: 0.0, class_weighted: false },
            7,
        );
        let model = fit(&spec, &x_train, &y_train).unwrap();
        let pred = model.predict(&x_test).unwrap();
        assert!(accuracy(&pred, &y_test) >= 0.95);
    }

    #[test]
    fn linear_svm_cannot_separate_xor_but_solves_blobs() {
        let (x_train, y_train) = xor_clusters(200, 31);
        let (x_test, y_test) = xor_clusters(80, 32);
        let spec = spec_for(ClassifierKind::LinearSvm, 3);
        let model = fit(&spec, &x_train, &y_train).unwrap();
        let acc = accuracy(&model.predict(&x_test).unwrap(), &y_test);
        assert!((0.4..=0.6).contains(&acc), "xor accuracy {acc}");

        let (x, y) = separable_blobs(100, 33);
        let model = fit(&spec, &x, &y).unwrap();
        let acc = accuracy(&model.predict(&x).unwrap(), &y);
        assert!(acc >= 0.95, "separable accuracy {acc}");
    }

    #[test]
    fn fit_rejects_degenerate_inputs() {
        let x = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let spec = spec_for(ClassifierKind::DecisionTree, 0);
        assert!(matches!(
            fit(&spec, &x, &[true, true]),
            Err(LearnError::SingleClass)
        ));
        assert!(matches!(
            fit(&spec, &x[..1], &[true]),
            Err(LearnError::TooFewSamples(1))
        ));
        let bad = vec![vec![f64::NAN, 0.0], vec![1.0, 2.0]];
        assert!(matches!(
            fit(&spec, &bad, &[true, false]),
            Err(LearnError::NonFinite)
        ));
    }

    #[test]
    fn refit_is_bit_identical() {
        let (x, y) = separable_blobs(60, 41);
        let (x_test, _) = separable_blobs(30, 42);
        for kind in ClassifierKind::ALL {
            let spec = spec_for(kind, 99);
            let a = fit(&spec, &x, &y).unwrap();
            let b = fit(&spec, &x, &y).unwrap();
            let pa = a.predict_proba(&x_test).unwrap();
            let pb = b.predict_proba(&x_test).unwrap();
            for (u, v) in pa.iter().zip(&pb) {
                assert_eq!(u.to_bits(), v.to_bits(), "{kind:?}");
            }
            assert_eq!(a.to_json(), b.to_json(), "{kind:?}");
        }
    }

    #[test]
    fn probabilities_stay_in_unit_interval() {
        let (x, y) = xor_clusters(120, 51);
        let (x_test, _) = xor_clusters(48, 52);
        for kind in ClassifierKind::ALL {
            let spec = spec_for(kind, 5);
            let model = fit(&spec, &x, &y).unwrap();
            for p in model.predict_proba(&x_test).unwrap() {
                assert!((0.0..=1.0).contains(&p), "{kind:?} produced {p}");
            }
        }
    }

    #[test]
    fn affine_rescaling_of_a_feature_does_not_change_predictions() {
        let (x, y) = separable_blobs(80, 61);
        let (x_test, _) = separable_blobs(40, 62);
        let rescale = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| vec![3.5 * r[0] + 10.0, r[1]])
                .collect()
        };
        let xr = rescale(&x);
        let xr_test = rescale(&x_test);
        for kind in ClassifierKind::ALL {
            let spec = spec_for(kind, 17);
            let base = fit(&spec, &x, &y).unwrap().predict_proba(&x_test).unwrap();
            let scaled = fit(&spec, &xr, &y).unwrap().predict_proba(&xr_test).unwrap();
            let tol = match kind {
                ClassifierKind::DecisionTree | ClassifierKind::RandomForest => 1e-9,
                _ => 1e-6,
            };
            for (a, b) in base.iter().zip(&scaled) {
                assert!((a - b).abs() <= tol, "{kind:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn model_json_round_trips() {
        let (x, y) = separable_blobs(40, 71);
        let spec = spec_for(ClassifierKind::RandomForest, 13);
        let model = fit(&spec, &x, &y).unwrap();
        let back = TrainedModel::from_json(&model.to_json()).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn grid_orders_are_stable() {
        assert_eq!(default_grid(ClassifierKind::DecisionTree, false).len(), 9);
        assert_eq!(default_grid(ClassifierKind::RandomForest, false).len(), 4);
        assert_eq!(default_grid(ClassifierKind::LinearSvm, false).len(), 3);
        assert_eq!(default_grid(ClassifierKind::LinearSvm, true).len(), 6);
        assert_eq!(default_grid(ClassifierKind::Mlp, false).len(), 4);
        assert_eq!(
            default_grid(ClassifierKind::DecisionTree, false)[0],
            HyperParams::Tree { max_depth: 2, min_samples_leaf: 1 }
        );
    }

    #[test]
    fn inverse_frequency_weights_balance_classes() {
        let y = [true, false, false, false];
        let w = sample_weights(&y, true);
        assert_eq!(w[0], 2.0); // 4 / (2*1)
        assert!((w[1] - 2.0 / 3.0).abs() < 1e-15);
        let wsum_pos: f64 = w.iter().zip(&y).filter(|(_, &l)| l).map(|(w, _)| w).sum();
        let wsum_neg: f64 = w.iter().zip(&y).filter(|(_, &l)| !l).map(|(w, _)| w).sum();
        assert!((wsum_pos - wsum_neg).abs() < 1e-12);
    }
}


//! Nested patient-level cross-validation with pooled outer-fold
//! predictions, weighted F1, percentile-bootstrap confidence intervals,
//! and a leakage audit log.
//!
//! Hyperparameters are tuned exclusively in the inner loop: for each outer
//! fold the remaining folds form four train/validation rotations, the grid
//! candidate with the highest mean inner weighted F1 is refit on all four
//! folds, and only then predicts the held-out fold. All randomness derives
//! from the run seed plus task coordinates, so reports are bit-reproducible
//! across runs and thread counts.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{Cohort, ViewId};
use crate::fusion::{
    cross_lung_expand, fuse_decisions, fuse_features, DecisionFusion, FeatureFusion, Fused,
    FusionError, MissingViewPolicy,
};
use crate::learners::{
    default_grid, fit, ClassifierKind, ClassifierSpec, HyperParams, LearnError, TrainedModel,
};
use crate::rng::{derive_seed, rng_from};
use crate::temporal::{
    build_day_pairs, to_sample, DayPairPolicy, DayPairSample, TemporalError, TemporalMode, ViewKey,
};

const FOLD_STREAM: u64 = 0x464f_4c44;
const FIT_STREAM: u64 = 0x4649_5400;
const REFIT_STREAM: u64 = 0x5246_5400;
const BOOT_STREAM: u64 = 0x424f_4f54;

/// Which views feed the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViewSelection {
    Single(ViewId),
    All,
}

/// Resampling unit for the bootstrap CI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BootstrapUnit {
    /// One unit per evaluated day-pair prediction (default).
    #[default]
    Prediction,
    /// One unit per patient (all of a patient's predictions move together).
    Patient,
}

/// Full ablation coordinates for one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub views: ViewSelection,
    pub temporal: TemporalMode,
    pub feature_fusion: Option<FeatureFusion>,
    pub decision_fusion: Option<DecisionFusion>,
    pub missing_view_policy: MissingViewPolicy,
    pub cross_lung: bool,
    pub day_policy: DayPairPolicy,
    /// Restrict evaluation (inner validation and outer test) to one
    /// day-pair, e.g. (1,2); training still uses every pair.
    pub eval_day_filter: Option<(u32, u32)>,
    pub classifiers: Vec<ClassifierKind>,
    /// Expose inverse-frequency class weighting as an extra grid axis
    /// (MLP and SVM only).
    pub class_weight_axis: bool,
    pub outer_folds: usize,
    pub bootstrap_iters: usize,
    pub bootstrap_unit: BootstrapUnit,
    pub seed: u64,
}

impl ExperimentConfig {
    /// A single-view baseline configuration; callers override fields.
    pub fn single_view(view: ViewId, classifier: ClassifierKind, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            views: ViewSelection::Single(view),
            temporal: TemporalMode::Difference,
            feature_fusion: None,
            decision_fusion: None,
            missing_view_policy: MissingViewPolicy::Skip,
            cross_lung: false,
            day_policy: DayPairPolicy::FirstPair,
            eval_day_filter: None,
            classifiers: vec![classifier],
            class_weight_axis: false,
            outer_folds: 5,
            bootstrap_iters: 2000,
            bootstrap_unit: BootstrapUnit::Prediction,
            seed,
        }
    }

    /// An all-views feature-fusion configuration.
    pub fn all_views(
        fusion: FeatureFusion,
        classifier: ClassifierKind,
        seed: u64,
    ) -> ExperimentConfig {
        let mut config = ExperimentConfig::single_view(ViewId::L1, classifier, seed);
        config.views = ViewSelection::All;
        config.feature_fusion = Some(fusion);
        config
    }

    /// An all-views decision-fusion configuration.
    pub fn all_views_decision(
        fusion: DecisionFusion,
        classifier: ClassifierKind,
        seed: u64,
    ) -> ExperimentConfig {
        let mut config = ExperimentConfig::single_view(ViewId::L1, classifier, seed);
        config.views = ViewSelection::All;
        config.decision_fusion = Some(fusion);
        config
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        match self.views {
            ViewSelection::All => {
                if self.feature_fusion.is_some() == self.decision_fusion.is_some() {
                    return Err(EvalError::InvalidConfig(
                        "all-views runs need exactly one of feature_fusion or decision_fusion"
                            .to_string(),
                    ));
                }
                if self.cross_lung {
                    return Err(EvalError::InvalidConfig(
                        "cross_lung applies to single-view runs only".to_string(),
                    ));
                }
            }
            ViewSelection::Single(_) => {
                if self.feature_fusion.is_some() || self.decision_fusion.is_some() {
                    return Err(EvalError::InvalidConfig(
                        "single-view runs take no fusion strategy".to_string(),
                    ));
                }
            }
        }
        if self.classifiers.is_empty() {
            return Err(EvalError::InvalidConfig("no classifiers listed".to_string()));
        }
        if self.outer_folds < 2 {
            return Err(EvalError::InvalidConfig("outer_folds must be >= 2".to_string()));
        }
        if self.bootstrap_iters == 0 {
            return Err(EvalError::InvalidConfig("bootstrap_iters must be > 0".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("need at least {k} patients, got {n}")]
    TooFewPatients { k: usize, n: usize },
    #[error("both outcome classes must be present")]
    SingleClassCohort,
    #[error("outer fold {fold}: degenerate training labels")]
    DegenerateTrainingFold { fold: usize },
    #[error("outer fold {fold}: empty evaluation set after filtering")]
    EmptyEvaluation { fold: usize },
    #[error("outer fold {fold}: no inner-validation samples in any rotation")]
    EmptyInnerValidation { fold: usize },
    #[error("outer fold {fold} rotation {rotation}: {err}")]
    InnerFit { fold: usize, rotation: usize, err: LearnError },
    #[error("outer fold {fold} refit: {err}")]
    Refit { fold: usize, err: LearnError },
    #[error("length mismatch: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("empty input")]
    EmptyInput,
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Temporal(#[from] TemporalError),
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Support-weighted mean of the per-class F1 scores.
///
/// Classes absent from `y_true` carry zero weight; any 0/0 precision or
/// recall defines that class's F1 as 0.
pub fn weighted_f1(y_true: &[bool], y_pred: &[bool]) -> Result<f64, EvalError> {
    if y_true.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch { a: y_true.len(), b: y_pred.len() });
    }
    Ok(weighted_f1_unchecked(y_true, y_pred))
}

pub(crate) fn weighted_f1_unchecked(y_true: &[bool], y_pred: &[bool]) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut tn = 0usize;
    let mut fn_ = 0usize;
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
            (true, false) => fn_ += 1,
        }
    }
    let f1 = |tp: usize, fp: usize, fn_: usize| -> f64 {
        let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    };
    let support_pos = tp + fn_;
    let support_neg = tn + fp;
    let f1_pos = f1(tp, fp, fn_);
    // Negative class scored with 0 as the "positive" label.
    let f1_neg = f1(tn, fn_, fp);
    (support_pos as f64 * f1_pos + support_neg as f64 * f1_neg)
        / (support_pos + support_neg) as f64
}

/// Empirical percentile with linear interpolation over a sorted slice.
fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Percentile-bootstrap confidence interval (2.5th-97.5th) of a metric over
/// prediction pairs, resampling with replacement at the pair level.
/// Deterministic given the seed.
pub fn bootstrap_ci<F>(
    pairs: &[(bool, bool)],
    metric: F,
    n_iter: usize,
    seed: u64,
) -> Result<(f64, f64), EvalError>
where
    F: Fn(&[bool], &[bool]) -> f64,
{
    if pairs.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = pairs.len();
    let mut rng = rng_from(seed, &[BOOT_STREAM]);
    let mut stats = Vec::with_capacity(n_iter);
    let mut yt = vec![false; n];
    let mut yp = vec![false; n];
    for _ in 0..n_iter {
        for i in 0..n {
            let (t, p) = pairs[rng.random_range(0..n)];
            yt[i] = t;
            yp[i] = p;
        }
        stats.push(metric(&yt, &yp));
    }
    stats.sort_by(|a, b| a.total_cmp(b));
    Ok((percentile_sorted(&stats, 0.025), percentile_sorted(&stats, 0.975)))
}

/// Patient-level bootstrap: groups resampled with replacement, each group's
/// predictions kept together.
pub fn bootstrap_ci_grouped<F>(
    groups: &[Vec<(bool, bool)>],
    metric: F,
    n_iter: usize,
    seed: u64,
) -> Result<(f64, f64), EvalError>
where
    F: Fn(&[bool], &[bool]) -> f64,
{
    if groups.is_empty() || groups.iter().all(|g| g.is_empty()) {
        return Err(EvalError::EmptyInput);
    }
    let n = groups.len();
    let mut rng = rng_from(seed, &[BOOT_STREAM]);
    let mut stats = Vec::with_capacity(n_iter);
    for _ in 0..n_iter {
        let mut yt = Vec::new();
        let mut yp = Vec::new();
        for _ in 0..n {
            for &(t, p) in &groups[rng.random_range(0..n)] {
                yt.push(t);
                yp.push(p);
            }
        }
        if yt.is_empty() {
            stats.push(0.0);
        } else {
            stats.push(metric(&yt, &yp));
        }
    }
    stats.sort_by(|a, b| a.total_cmp(b));
    Ok((percentile_sorted(&stats, 0.025), percentile_sorted(&stats, 0.975)))
}

// ---------------------------------------------------------------------------
// Fold plan
// ---------------------------------------------------------------------------

/// Stratified outer-fold assignment with the inner rotation schedule
/// implied by "all folds except the test fold".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: BTreeMap<String, usize>,
}

impl FoldPlan {
    pub fn fold_patients(&self, fold: usize) -> Vec<String> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(p, _)| p.clone())
            .collect()
    }

    pub fn positive_counts(&self, labels: &BTreeMap<String, bool>) -> Vec<usize> {
        let mut counts = vec![0usize; self.k];
        for (p, &f) in &self.assignment {
            if labels[p] {
                counts[f] += 1;
            }
        }
        counts
    }

    /// Inner folds for one outer fold, in rotation order.
    pub fn inner_folds(&self, outer: usize) -> Vec<usize> {
        (0..self.k).filter(|&f| f != outer).collect()
    }
}

/// Splits patients into k stratified folds: a seeded shuffle within each
/// class, then one round-robin pass that assigns the shuffled positives
/// and continues through the negatives, keeping both class counts and
/// fold sizes within one of each other.
pub fn make_outer_folds(
    patients: &[String],
    labels: &[bool],
    k: usize,
    seed: u64,
) -> Result<FoldPlan, EvalError> {
    if patients.len() < k {
        return Err(EvalError::TooFewPatients { k, n: patients.len() });
    }
    if patients.len() != labels.len() {
        return Err(EvalError::LengthMismatch { a: patients.len(), b: labels.len() });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(EvalError::SingleClassCohort);
    }
    let mut rng = rng_from(seed, &[FOLD_STREAM]);
    fn shuffle<'a>(rng: &mut impl Rng, mut items: Vec<&'a String>) -> Vec<&'a String> {
        for i in (1..items.len()).rev() {
            let j = rng.random_range(0..=i);
            items.swap(i, j);
        }
        items
    }
    let positives: Vec<&String> = patients
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(p, _)| p)
        .collect();
    let negatives: Vec<&String> = patients
        .iter()
        .zip(labels)
        .filter(|(_, &l)| !l)
        .map(|(p, _)| p)
        .collect();
    let positives = shuffle(&mut rng, positives);
    let negatives = shuffle(&mut rng, negatives);

    let mut assignment = BTreeMap::new();
    let mut next_fold = 0usize;
    for p in positives.into_iter().chain(negatives) {
        assignment.insert(p.clone(), next_fold);
        next_fold = (next_fold + 1) % k;
    }
    Ok(FoldPlan { k, assignment })
}

// ---------------------------------------------------------------------------
// Leakage audit
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AccessPhase {
    InnerTrain,
    InnerValidate,
    Refit,
    OuterPredict,
}

/// Which patients' samples were used in which phase of which outer fold.
/// Proves that outer-test samples are first touched at prediction time.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditLog {
    pub entries: BTreeSet<(usize, AccessPhase, String)>,
}

impl AuditLog {
    fn record(&mut self, fold: usize, phase: AccessPhase, patient: &str) {
        self.entries.insert((fold, phase, patient.to_string()));
    }

    fn record_all<'a>(
        &mut self,
        fold: usize,
        phase: AccessPhase,
        patients: impl IntoIterator<Item = &'a str>,
    ) {
        for p in patients {
            self.record(fold, phase, p);
        }
    }

    /// Returns human-readable violations; empty means the run is clean.
    pub fn violations(&self, plan: &FoldPlan) -> Vec<String> {
        let mut out = Vec::new();
        for fold in 0..plan.k {
            let test: BTreeSet<String> = plan.fold_patients(fold).into_iter().collect();
            for (f, phase, patient) in &self.entries {
                if *f != fold {
                    continue;
                }
                match phase {
                    AccessPhase::OuterPredict => {
                        if !test.contains(patient) {
                            out.push(format!(
                                "fold {fold}: predicted non-test patient {patient}"
                            ));
                        }
                    }
                    _ => {
                        if test.contains(patient) {
                            out.push(format!(
                                "fold {fold}: test patient {patient} accessed in {phase:?}"
                            ));
                        }
                    }
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

/// One pooled outer-fold prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub patient_id: String,
    pub view: ViewKey,
    pub day_a: u32,
    pub day_b: u32,
    pub y_true: bool,
    pub proba: f64,
    pub y_pred: bool,
}

/// Inner-loop outcome for one outer fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldDetail {
    pub fold: usize,
    /// Index of the winning candidate in canonical grid order.
    pub selected_index: usize,
    pub selected_kind: ClassifierKind,
    pub selected_params: HyperParams,
    pub selected_desc: String,
    /// Mean inner-validation weighted F1 per candidate, in grid order.
    pub candidate_scores: Vec<f64>,
    /// Inner scores of the selected candidate, one per rotation.
    pub inner_scores: Vec<f64>,
    pub n_train_samples: usize,
    pub n_eval_samples: usize,
}

/// One evaluation unit identity, independent of model outputs. Used to
/// assert that training-side choices (e.g. cross-lung pooling) never touch
/// the evaluation set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EvalUnit {
    pub patient_id: String,
    pub view: String,
    pub day_a: u32,
    pub day_b: u32,
    pub y_true: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config: ExperimentConfig,
    pub fold_plan: FoldPlan,
    pub predictions: Vec<PredictionRecord>,
    pub weighted_f1: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub per_fold: Vec<FoldDetail>,
    /// Dimension of the vectors the classifier consumed (6d under
    /// all-views concatenation, 2d under temporal concatenation, ...).
    pub feature_dim: usize,
    pub warnings: Vec<String>,
    pub audit: AuditLog,
    pub audit_violations: Vec<String>,
    /// Sorted multiset of evaluation units across all outer folds.
    pub eval_fingerprint: Vec<EvalUnit>,
    /// Wall-clock seconds; excluded from serialized reports so rerunning a
    /// config yields byte-identical files.
    #[serde(skip)]
    pub runtime_seconds: f64,
}

impl EvaluationReport {
    /// "0.80 [0.62–0.96]" — the table cell rendering.
    pub fn cell(&self) -> String {
        format_f1_ci(self.weighted_f1, self.ci_lo, self.ci_hi)
    }
}

/// Formats a point estimate with its CI the way the result tables print it.
pub fn format_f1_ci(f1: f64, lo: f64, hi: f64) -> String {
    format!("{f1:.2} [{lo:.2}\u{2013}{hi:.2}]")
}

// ---------------------------------------------------------------------------
// Sample construction
// ---------------------------------------------------------------------------

enum SampleBank {
    /// Samples of the target view plus (when pooling) its mirror.
    SingleView { view: ViewId, pool: Vec<DayPairSample> },
    /// One fused sample per (patient, day-pair).
    FeatureFused { samples: Vec<DayPairSample> },
    /// Per-view samples for decision-level fusion.
    PerView { by_view: BTreeMap<ViewId, Vec<DayPairSample>> },
}

struct BuiltSamples {
    bank: SampleBank,
    warnings: Vec<String>,
}

fn build_samples(cohort: &Cohort, config: &ExperimentConfig) -> Result<BuiltSamples, EvalError> {
    let mut warnings = Vec::new();
    // Pairs bridging a missing day, e.g. (1,3); included, but reported.
    let mut gap_pairs = 0usize;
    let mut collect = |warnings: &mut Vec<String>,
                       view: crate::cohort::ViewId|
     -> Result<Vec<DayPairSample>, EvalError> {
        let (pairs, skips) = build_day_pairs(cohort, view, config.day_policy);
        for s in skips {
            warnings.push(format!(
                "view {}: patient {} skipped: {}",
                s.view, s.patient_id, s.reason
            ));
        }
        gap_pairs += pairs.iter().filter(|p| p.day_b > p.day_a + 1).count();
        pairs.iter().map(|pair| Ok(to_sample(pair, config.temporal)?)).collect()
    };
    let bank = match config.views {
        ViewSelection::Single(view) => {
            let mut pool = collect(&mut warnings, view)?;
            if config.cross_lung {
                pool.extend(collect(&mut warnings, view.mirror())?);
            }
            SampleBank::SingleView { view, pool }
        }
        ViewSelection::All => {
            // Per-view temporal vectors first, in all cases.
            let mut by_view: BTreeMap<ViewId, Vec<DayPairSample>> = BTreeMap::new();
            for view in ViewId::ALL {
                let samples = collect(&mut warnings, view)?;
                by_view.insert(view, samples);
            }
            if let Some(strategy) = config.feature_fusion {
                // Group per (patient, day-pair) and fuse.
                type FusionGroup = (BTreeMap<ViewId, Vec<f64>>, bool);
                let mut grouped: BTreeMap<(String, u32, u32), FusionGroup> = BTreeMap::new();
                for (view, samples) in &by_view {
                    for s in samples {
                        let entry = grouped
                            .entry((s.patient_id.clone(), s.day_a, s.day_b))
                            .or_insert_with(|| (BTreeMap::new(), s.label));
                        entry.0.insert(*view, s.vector.clone());
                    }
                }
                let mut samples = Vec::new();
                for ((patient_id, day_a, day_b), (per_view, label)) in grouped {
                    match fuse_features(&per_view, strategy, config.missing_view_policy)? {
                        Fused::Vector(vector) => samples.push(DayPairSample {
                            patient_id,
                            view: ViewKey::AllViews,
                            day_a,
                            day_b,
                            vector,
                            label,
                        }),
                        Fused::Skipped { missing } => warnings.push(format!(
                            "fused sample {patient_id} ({day_a},{day_b}) skipped: missing views {missing:?}"
                        )),
                    }
                }
                SampleBank::FeatureFused { samples }
            } else {
                SampleBank::PerView { by_view }
            }
        }
    };
    if gap_pairs > 0 {
        warnings.push(format!("{gap_pairs} day-pairs bridge a missing day"));
    }
    Ok(BuiltSamples { bank, warnings })
}

fn matrix_of(samples: &[&DayPairSample]) -> (Vec<Vec<f64>>, Vec<bool>) {
    (
        samples.iter().map(|s| s.vector.clone()).collect(),
        samples.iter().map(|s| s.label).collect(),
    )
}

fn in_set(patient: &str, set: &BTreeSet<&str>) -> bool {
    set.contains(patient)
}

fn passes_filter(s: &DayPairSample, filter: Option<(u32, u32)>) -> bool {
    filter.is_none_or(|(a, b)| s.day_a == a && s.day_b == b)
}

/// A decision-fusion evaluation unit: per-view vectors for one
/// (patient, day-pair).
struct EvalGroup<'a> {
    patient_id: &'a str,
    day_a: u32,
    day_b: u32,
    label: bool,
    per_view: BTreeMap<ViewId, &'a [f64]>,
}

fn group_for_decision<'a>(
    by_view: &'a BTreeMap<ViewId, Vec<DayPairSample>>,
    patients: &BTreeSet<&str>,
    filter: Option<(u32, u32)>,
) -> Vec<EvalGroup<'a>> {
    let mut grouped: BTreeMap<(&'a str, u32, u32), EvalGroup<'a>> = BTreeMap::new();
    for (view, samples) in by_view {
        for s in samples {
            if !in_set(&s.patient_id, patients) || !passes_filter(s, filter) {
                continue;
            }
            let entry = grouped
                .entry((s.patient_id.as_str(), s.day_a, s.day_b))
                .or_insert_with(|| EvalGroup {
                    patient_id: &s.patient_id,
                    day_a: s.day_a,
                    day_b: s.day_b,
                    label: s.label,
                    per_view: BTreeMap::new(),
                });
            entry.per_view.insert(*view, &s.vector);
        }
    }
    grouped.into_values().collect()
}

// ---------------------------------------------------------------------------
// Nested cross-validation
// ---------------------------------------------------------------------------

/// All (kind, params) grid candidates in canonical tie-break order.
fn enumerate_candidates(config: &ExperimentConfig) -> Vec<(ClassifierKind, HyperParams)> {
    let mut out = Vec::new();
    for &kind in &config.classifiers {
        let weight_axis = config.class_weight_axis
            && matches!(
                kind,
                ClassifierKind::LinearSvm | ClassifierKind::Mlp | ClassifierKind::MlpLarge
            );
        for params in default_grid(kind, weight_axis) {
            out.push((kind, params));
        }
    }
    out
}

/// Models trained for one candidate: a single model, or one per view under
/// decision fusion.
enum FittedCandidate {
    Single(TrainedModel),
    PerView(BTreeMap<ViewId, TrainedModel>),
}

#[allow(clippy::too_many_arguments)]
fn fit_candidate(
    bank: &SampleBank,
    config: &ExperimentConfig,
    train_patients: &BTreeSet<&str>,
    kind: ClassifierKind,
    params: &HyperParams,
    seed: u64,
    audit: &mut AuditLog,
    fold: usize,
    phase: AccessPhase,
) -> Result<FittedCandidate, LearnError> {
    match bank {
        SampleBank::SingleView { view, pool } => {
            let train: Vec<&DayPairSample> = pool
                .iter()
                .filter(|s| in_set(&s.patient_id, train_patients))
                .collect();
            let owned: Vec<DayPairSample> = train.into_iter().cloned().collect();
            let expanded = cross_lung_expand(&owned, *view, config.cross_lung)
                .expect("single-view bank cannot hold fused samples");
            audit.record_all(fold, phase, expanded.iter().map(|s| s.patient_id.as_str()));
            let (x, y) = matrix_of(&expanded.iter().collect::<Vec<_>>());
            let spec = ClassifierSpec::new(kind, params.clone(), seed);
            Ok(FittedCandidate::Single(fit(&spec, &x, &y)?))
        }
        SampleBank::FeatureFused { samples } => {
            let train: Vec<&DayPairSample> = samples
                .iter()
                .filter(|s| in_set(&s.patient_id, train_patients))
                .collect();
            audit.record_all(fold, phase, train.iter().map(|s| s.patient_id.as_str()));
            let (x, y) = matrix_of(&train);
            let spec = ClassifierSpec::new(kind, params.clone(), seed);
            Ok(FittedCandidate::Single(fit(&spec, &x, &y)?))
        }
        SampleBank::PerView { by_view } => {
            let mut models = BTreeMap::new();
            for (view_idx, (view, samples)) in by_view.iter().enumerate() {
                let train: Vec<&DayPairSample> = samples
                    .iter()
                    .filter(|s| in_set(&s.patient_id, train_patients))
                    .collect();
                audit.record_all(fold, phase, train.iter().map(|s| s.patient_id.as_str()));
                let (x, y) = matrix_of(&train);
                let spec =
                    ClassifierSpec::new(kind, params.clone(), derive_seed(seed, &[view_idx as u64]));
                models.insert(*view, fit(&spec, &x, &y)?);
            }
            Ok(FittedCandidate::PerView(models))
        }
    }
}

/// Predictions of a fitted candidate on the evaluation units drawn from
/// `patients`, honoring the day filter.
fn predict_candidate(
    bank: &SampleBank,
    config: &ExperimentConfig,
    model: &FittedCandidate,
    patients: &BTreeSet<&str>,
) -> Result<Vec<PredictionRecord>, EvalError> {
    let filter = config.eval_day_filter;
    let mut out = Vec::new();
    match (bank, model) {
        (SampleBank::SingleView { pool, view }, FittedCandidate::Single(m)) => {
            let eval: Vec<&DayPairSample> = pool
                .iter()
                .filter(|s| {
                    s.view == ViewKey::Single(*view)
                        && in_set(&s.patient_id, patients)
                        && passes_filter(s, filter)
                })
                .collect();
            let (x, y) = matrix_of(&eval);
            let probas = m.predict_proba(&x).map_err(|err| EvalError::Refit { fold: 0, err })?;
            for ((s, proba), y_true) in eval.iter().zip(probas).zip(y) {
                out.push(PredictionRecord {
                    patient_id: s.patient_id.clone(),
                    view: s.view,
                    day_a: s.day_a,
                    day_b: s.day_b,
                    y_true,
                    proba,
                    y_pred: proba >= 0.5,
                });
            }
        }
        (SampleBank::FeatureFused { samples }, FittedCandidate::Single(m)) => {
            let eval: Vec<&DayPairSample> = samples
                .iter()
                .filter(|s| in_set(&s.patient_id, patients) && passes_filter(s, filter))
                .collect();
            let (x, y) = matrix_of(&eval);
            let probas = m.predict_proba(&x).map_err(|err| EvalError::Refit { fold: 0, err })?;
            for ((s, proba), y_true) in eval.iter().zip(probas).zip(y) {
                out.push(PredictionRecord {
                    patient_id: s.patient_id.clone(),
                    view: s.view,
                    day_a: s.day_a,
                    day_b: s.day_b,
                    y_true,
                    proba,
                    y_pred: proba >= 0.5,
                });
            }
        }
        (SampleBank::PerView { by_view }, FittedCandidate::PerView(models)) => {
            let strategy = config
                .decision_fusion
                .expect("decision fusion config validated");
            for group in group_for_decision(by_view, patients, filter) {
                let mut per_view_proba = BTreeMap::new();
                for (view, vector) in &group.per_view {
                    let m = &models[view];
                    let proba = m
                        .predict_proba(std::slice::from_ref(&vector.to_vec()))
                        .map_err(|err| EvalError::Refit { fold: 0, err })?[0];
                    per_view_proba.insert(*view, proba);
                }
                let (label, fused_proba) = fuse_decisions(&per_view_proba, strategy, 0.5)?;
                out.push(PredictionRecord {
                    patient_id: group.patient_id.to_string(),
                    view: ViewKey::AllViews,
                    day_a: group.day_a,
                    day_b: group.day_b,
                    y_true: group.label,
                    proba: fused_proba,
                    y_pred: label,
                });
            }
        }
        _ => unreachable!("bank and candidate shapes always match"),
    }
    Ok(out)
}

/// Runs the full nested cross-validation for one configuration.
pub fn nested_cv(config: &ExperimentConfig, cohort: &Cohort) -> Result<EvaluationReport, EvalError> {
    let start = Instant::now();
    config.validate()?;
    let patients = cohort.patient_ids();
    let labels: Vec<bool> = patients
        .iter()
        .map(|p| cohort.label_of(p).expect("cohort invariant"))
        .collect();
    let plan = make_outer_folds(
        &patients,
        &labels,
        config.outer_folds,
        derive_seed(config.seed, &[FOLD_STREAM]),
    )?;
    let built = build_samples(cohort, config)?;
    let bank = built.bank;
    let mut warnings = built.warnings;
    let candidates = enumerate_candidates(config);
    let mut audit = AuditLog::default();
    let mut pooled: Vec<PredictionRecord> = Vec::new();
    let mut per_fold = Vec::new();

    for fold in 0..plan.k {
        let test_patients_vec = plan.fold_patients(fold);
        let test_patients: BTreeSet<&str> =
            test_patients_vec.iter().map(|s| s.as_str()).collect();
        let train_patients: BTreeSet<&str> = patients
            .iter()
            .map(|s| s.as_str())
            .filter(|p| !test_patients.contains(p))
            .collect();

        // Outer training fold must contain both classes.
        let train_labels: Vec<bool> = patients
            .iter()
            .zip(&labels)
            .filter(|(p, _)| train_patients.contains(p.as_str()))
            .map(|(_, &l)| l)
            .collect();
        let pos = train_labels.iter().filter(|&&l| l).count();
        if pos == 0 || pos == train_labels.len() {
            return Err(EvalError::DegenerateTrainingFold { fold });
        }

        let inner = plan.inner_folds(fold);
        let mut best: Option<(usize, f64)> = None;
        let mut candidate_scores = Vec::with_capacity(candidates.len());
        let mut inner_scores_by_candidate: Vec<Vec<f64>> = Vec::with_capacity(candidates.len());
        for (c_idx, (kind, params)) in candidates.iter().enumerate() {
            let mut rotation_scores = Vec::new();
            for (r_idx, &val_fold) in inner.iter().enumerate() {
                let val_patients_vec = plan.fold_patients(val_fold);
                let val_patients: BTreeSet<&str> =
                    val_patients_vec.iter().map(|s| s.as_str()).collect();
                let rot_train: BTreeSet<&str> = train_patients
                    .iter()
                    .copied()
                    .filter(|p| !val_patients.contains(p))
                    .collect();
                let seed = derive_seed(
                    config.seed,
                    &[FIT_STREAM, fold as u64, r_idx as u64, c_idx as u64],
                );
                let fitted = fit_candidate(
                    &bank,
                    config,
                    &rot_train,
                    *kind,
                    params,
                    seed,
                    &mut audit,
                    fold,
                    AccessPhase::InnerTrain,
                )
                .map_err(|err| EvalError::InnerFit { fold, rotation: r_idx, err })?;
                let preds = predict_candidate(&bank, config, &fitted, &val_patients)?;
                audit.record_all(
                    fold,
                    AccessPhase::InnerValidate,
                    preds.iter().map(|p| p.patient_id.as_str()),
                );
                if preds.is_empty() {
                    continue;
                }
                let yt: Vec<bool> = preds.iter().map(|p| p.y_true).collect();
                let yp: Vec<bool> = preds.iter().map(|p| p.y_pred).collect();
                rotation_scores.push(weighted_f1_unchecked(&yt, &yp));
            }
            if rotation_scores.is_empty() {
                return Err(EvalError::EmptyInnerValidation { fold });
            }
            let mean = rotation_scores.iter().sum::<f64>() / rotation_scores.len() as f64;
            candidate_scores.push(mean);
            inner_scores_by_candidate.push(rotation_scores);
            // Strict improvement keeps the earliest candidate on ties.
            if best.as_ref().is_none_or(|(_, s)| mean > *s) {
                best = Some((c_idx, mean));
            }
        }
        let (best_idx, _) = best.expect("at least one candidate");
        let (best_kind, best_params) = &candidates[best_idx];

        let refit_seed = derive_seed(config.seed, &[REFIT_STREAM, fold as u64, best_idx as u64]);
        let refit = fit_candidate(
            &bank,
            config,
            &train_patients,
            *best_kind,
            best_params,
            refit_seed,
            &mut audit,
            fold,
            AccessPhase::Refit,
        )
        .map_err(|err| EvalError::Refit { fold, err })?;
        let preds = predict_candidate(&bank, config, &refit, &test_patients)?;
        if preds.is_empty() {
            return Err(EvalError::EmptyEvaluation { fold });
        }
        audit.record_all(
            fold,
            AccessPhase::OuterPredict,
            preds.iter().map(|p| p.patient_id.as_str()),
        );

        let n_train_samples = match &bank {
            SampleBank::SingleView { view, pool } => {
                let owned: Vec<DayPairSample> = pool
                    .iter()
                    .filter(|s| in_set(&s.patient_id, &train_patients))
                    .cloned()
                    .collect();
                cross_lung_expand(&owned, *view, config.cross_lung)
                    .expect("single-view bank")
                    .len()
            }
            SampleBank::FeatureFused { samples } => samples
                .iter()
                .filter(|s| in_set(&s.patient_id, &train_patients))
                .count(),
            SampleBank::PerView { by_view } => by_view
                .values()
                .map(|samples| {
                    samples
                        .iter()
                        .filter(|s| in_set(&s.patient_id, &train_patients))
                        .count()
                })
                .sum(),
        };

        per_fold.push(FoldDetail {
            fold,
            selected_index: best_idx,
            selected_kind: *best_kind,
            selected_params: best_params.clone(),
            selected_desc: format!("{} {}", best_kind.as_str(), best_params.describe()),
            candidate_scores,
            inner_scores: inner_scores_by_candidate[best_idx].clone(),
            n_train_samples,
            n_eval_samples: preds.len(),
        });
        pooled.extend(preds);
    }

    let yt: Vec<bool> = pooled.iter().map(|p| p.y_true).collect();
    let yp: Vec<bool> = pooled.iter().map(|p| p.y_pred).collect();
    let f1 = weighted_f1(&yt, &yp)?;
    let boot_seed = derive_seed(config.seed, &[BOOT_STREAM]);
    let (ci_lo, ci_hi) = match config.bootstrap_unit {
        BootstrapUnit::Prediction => {
            let pairs: Vec<(bool, bool)> =
                pooled.iter().map(|p| (p.y_true, p.y_pred)).collect();
            bootstrap_ci(&pairs, weighted_f1_unchecked, config.bootstrap_iters, boot_seed)?
        }
        BootstrapUnit::Patient => {
            let mut groups: BTreeMap<&str, Vec<(bool, bool)>> = BTreeMap::new();
            for p in &pooled {
                groups.entry(&p.patient_id).or_default().push((p.y_true, p.y_pred));
            }
            let groups: Vec<Vec<(bool, bool)>> = groups.into_values().collect();
            bootstrap_ci_grouped(&groups, weighted_f1_unchecked, config.bootstrap_iters, boot_seed)?
        }
    };

    let feature_dim = match &bank {
        SampleBank::SingleView { pool, .. } => pool.first().map_or(0, |s| s.vector.len()),
        SampleBank::FeatureFused { samples } => samples.first().map_or(0, |s| s.vector.len()),
        SampleBank::PerView { by_view } => by_view
            .values()
            .find_map(|s| s.first())
            .map_or(0, |s| s.vector.len()),
    };

    let mut eval_fingerprint: Vec<EvalUnit> = pooled
        .iter()
        .map(|p| EvalUnit {
            patient_id: p.patient_id.clone(),
            view: p.view.as_str().to_string(),
            day_a: p.day_a,
            day_b: p.day_b,
            y_true: p.y_true,
        })
        .collect();
    eval_fingerprint.sort();
    warnings.dedup();
    let audit_violations = audit.violations(&plan);

    let expected: usize = per_fold.iter().map(|f| f.n_eval_samples).sum();
    debug_assert_eq!(expected, pooled.len());

    Ok(EvaluationReport {
        config: config.clone(),
        fold_plan: plan,
        predictions: pooled,
        weighted_f1: f1,
        ci_lo,
        ci_hi,
        per_fold,
        feature_dim,
        warnings,
        audit,
        audit_violations,
        eval_fingerprint,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Rebuilds the refit model of one outer fold, bit-identical to the one
/// `nested_cv` used: same training slice, winning hyperparameters, and
/// derived seed. Only single-model runs (single view or feature fusion)
/// are supported; decision-fusion runs hold one model per view.
pub fn refit_model(
    config: &ExperimentConfig,
    cohort: &Cohort,
    plan: &FoldPlan,
    detail: &FoldDetail,
) -> Result<TrainedModel, EvalError> {
    config.validate()?;
    if config.decision_fusion.is_some() {
        return Err(EvalError::InvalidConfig(
            "refit_model does not apply to decision-fusion runs".to_string(),
        ));
    }
    let built = build_samples(cohort, config)?;
    let test: BTreeSet<String> = plan.fold_patients(detail.fold).into_iter().collect();
    let train_patients: BTreeSet<&str> = plan
        .assignment
        .keys()
        .map(|s| s.as_str())
        .filter(|p| !test.contains(*p))
        .collect();
    let seed = derive_seed(
        config.seed,
        &[REFIT_STREAM, detail.fold as u64, detail.selected_index as u64],
    );
    let mut audit = AuditLog::default();
    let fitted = fit_candidate(
        &built.bank,
        config,
        &train_patients,
        detail.selected_kind,
        &detail.selected_params,
        seed,
        &mut audit,
        detail.fold,
        AccessPhase::Refit,
    )
    .map_err(|err| EvalError::Refit { fold: detail.fold, err })?;
    match fitted {
        FittedCandidate::Single(model) => Ok(model),
        FittedCandidate::PerView(_) => unreachable!("decision fusion rejected above"),
    }
}

//! Prognostic modeling over longitudinal multi-view feature vectors.
//!
//! The pipeline ingests per-clip feature vectors (one vector per patient,
//! lung view, and hospitalization day), builds temporal day-pair
//! representations, fuses views at the feature or decision level, trains
//! deterministic from-scratch classifiers, and evaluates them with
//! patient-level nested cross-validation and bootstrap confidence
//! intervals. A synthetic cohort generator with planted effects and a
//! Monte-Carlo Bayes-rate oracle provides the verification substrate.

pub mod cohort;
pub mod evaluation;
pub mod fusion;
pub mod importance;
pub mod learners;
pub mod rng;
pub mod synthcohort;
pub mod temporal;

pub use cohort::{ClipRecord, Cohort, CohortError, CohortSummary, FeatureSource, PatientOutcome, ViewId};
pub use evaluation::{
    bootstrap_ci, make_outer_folds, nested_cv, weighted_f1, EvalError, EvaluationReport,
    ExperimentConfig, FoldPlan, ViewSelection,
};
pub use fusion::{DecisionFusion, FeatureFusion, FusionError, MissingViewPolicy};
pub use learners::{ClassifierKind, ClassifierSpec, LearnError, TrainedModel};
pub use synthcohort::{GeneratorParams, OracleRepresentation, SynthError};
pub use temporal::{DayPairPolicy, DayPairSample, TemporalMode, ViewKey};

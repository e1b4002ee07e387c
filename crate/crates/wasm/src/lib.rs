//! Browser bindings for the demo page: generate a synthetic cohort and
//! look at its planted structure, run one nested-CV experiment, or fill
//! the fusion-by-temporal heatmap. All entry points take and return JSON
//! strings so the page needs no generated TypeScript glue.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use prognoses_core::cohort::{summarize, ViewId};
use prognoses_core::evaluation::{nested_cv, ExperimentConfig, ViewSelection};
use prognoses_core::fusion::{DecisionFusion, FeatureFusion};
use prognoses_core::learners::ClassifierKind;
use prognoses_core::synthcohort::{
    bayes_f1, generate, GeneratorParams, OracleRepresentation,
};
use prognoses_core::temporal::TemporalMode;

#[derive(Debug, Deserialize)]
struct DemoParams {
    #[serde(default = "default_n")]
    n_patients: usize,
    #[serde(default = "default_prevalence")]
    prevalence: f64,
    #[serde(default)]
    static_effect: f64,
    #[serde(default)]
    trajectory_effect: f64,
    #[serde(default = "default_sigma")]
    noise_sigma: f64,
    #[serde(default)]
    seed: u64,
}

fn default_n() -> usize {
    30
}
fn default_prevalence() -> f64 {
    0.3
}
fn default_sigma() -> f64 {
    1.0
}

impl DemoParams {
    fn to_generator(&self) -> GeneratorParams {
        let mut p = GeneratorParams::new(self.seed);
        p.n_patients = self.n_patients.clamp(8, 200);
        p.prevalence = self.prevalence.clamp(0.05, 0.95);
        p.static_effect = self.static_effect;
        p.trajectory_effect = self.trajectory_effect;
        p.noise_sigma = self.noise_sigma.max(0.05);
        p
    }
}

#[derive(Debug, Serialize)]
struct PatientPreview {
    id: String,
    label: bool,
    severity_day1: f64,
    severity_day2: f64,
    /// Projection of the L3 feature vectors onto the planted L3 direction.
    l3_proj_day1: f64,
    l3_proj_day2: f64,
}

#[derive(Debug, Serialize)]
struct CohortPreview {
    patients: Vec<PatientPreview>,
    positives: usize,
    negatives: usize,
    records: usize,
    bayes_f1_all_views_diff: f64,
    majority_f1: f64,
}

fn preview_inner(params_json: &str) -> Result<String, String> {
    let demo: DemoParams = serde_json::from_str(params_json).map_err(|e| e.to_string())?;
    let params = demo.to_generator();
    let (cohort, truth) = generate(&params).map_err(|e| e.to_string())?;
    let l3_direction = &truth.directions[2];
    let project = |patient: &str, day: u32| -> f64 {
        cohort
            .record_for(patient, ViewId::L3, day)
            .map(|r| r.features.iter().zip(l3_direction).map(|(x, u)| x * u).sum())
            .unwrap_or(0.0)
    };
    let patients: Vec<PatientPreview> = cohort
        .outcomes()
        .iter()
        .map(|o| {
            let days = &truth.day_severity[&o.patient_id];
            PatientPreview {
                id: o.patient_id.clone(),
                label: o.readmitted_30d,
                severity_day1: days[&1],
                severity_day2: days[&2],
                l3_proj_day1: project(&o.patient_id, 1),
                l3_proj_day2: project(&o.patient_id, 2),
            }
        })
        .collect();
    let summary = summarize(&cohort);
    let rep = OracleRepresentation::AllViewsConcat {
        mode: TemporalMode::Difference,
        day_a: 1,
        day_b: 2,
    };
    let preview = CohortPreview {
        patients,
        positives: summary.positives,
        negatives: summary.negatives,
        records: summary.total_records,
        bayes_f1_all_views_diff: bayes_f1(&params, &rep, 20_000).map_err(|e| e.to_string())?,
        majority_f1: prognoses_core::synthcohort::majority_f1(params.prevalence),
    };
    serde_json::to_string(&preview).map_err(|e| e.to_string())
}

/// Generate a cohort and return per-patient latent severities, planted
/// L3 projections, and the Bayes-rate reference for the current knobs.
#[wasm_bindgen]
pub fn cohort_preview(params_json: &str) -> Result<String, JsValue> {
    preview_inner(params_json).map_err(|e| JsValue::from_str(&e))
}

#[derive(Debug, Deserialize)]
struct ExperimentRequest {
    #[serde(flatten)]
    params: DemoParams,
    /// "L1".."R3" or "all"
    #[serde(default = "default_view")]
    view: String,
    /// "difference" | "concatenate"
    #[serde(default = "default_temporal")]
    temporal: String,
    /// "svm" | "decision_tree" | "random_forest" | "mlp"
    #[serde(default = "default_classifier")]
    classifier: String,
    #[serde(default)]
    cross_lung: bool,
}

fn default_view() -> String {
    "L3".to_string()
}
fn default_temporal() -> String {
    "difference".to_string()
}
fn default_classifier() -> String {
    "svm".to_string()
}

#[derive(Debug, Serialize)]
struct ExperimentResponse {
    f1: f64,
    ci_lo: f64,
    ci_hi: f64,
    n_predictions: usize,
    feature_dim: usize,
    selected: Vec<String>,
    audit_clean: bool,
}

fn experiment_config(req: &ExperimentRequest, seed: u64) -> Result<ExperimentConfig, String> {
    let classifier = ClassifierKind::parse(&req.classifier)
        .ok_or_else(|| format!("unknown classifier {:?}", req.classifier))?;
    let mut config = if req.view.eq_ignore_ascii_case("all") {
        ExperimentConfig::all_views(FeatureFusion::Concatenate, classifier, seed)
    } else {
        let view = ViewId::parse(&req.view).ok_or_else(|| format!("unknown view {:?}", req.view))?;
        ExperimentConfig::single_view(view, classifier, seed)
    };
    config.temporal = match req.temporal.as_str() {
        "difference" => TemporalMode::Difference,
        "concatenate" => TemporalMode::Concatenate,
        other => return Err(format!("unknown temporal mode {other:?}")),
    };
    config.cross_lung = req.cross_lung && matches!(config.views, ViewSelection::Single(_));
    config.bootstrap_iters = 500;
    Ok(config)
}

fn experiment_inner(request_json: &str) -> Result<String, String> {
    let req: ExperimentRequest = serde_json::from_str(request_json).map_err(|e| e.to_string())?;
    let params = req.params.to_generator();
    let (cohort, _) = generate(&params).map_err(|e| e.to_string())?;
    let config = experiment_config(&req, params.seed ^ 0x5eed)?;
    let report = nested_cv(&config, &cohort).map_err(|e| e.to_string())?;
    let response = ExperimentResponse {
        f1: report.weighted_f1,
        ci_lo: report.ci_lo,
        ci_hi: report.ci_hi,
        n_predictions: report.predictions.len(),
        feature_dim: report.feature_dim,
        selected: report.per_fold.iter().map(|f| f.selected_desc.clone()).collect(),
        audit_clean: report.audit_violations.is_empty(),
    };
    serde_json::to_string(&response).map_err(|e| e.to_string())
}

/// Run one nested cross-validation experiment on a freshly generated
/// cohort and return the pooled weighted F1 with its bootstrap CI.
#[wasm_bindgen]
pub fn run_experiment(request_json: &str) -> Result<String, JsValue> {
    experiment_inner(request_json).map_err(|e| JsValue::from_str(&e))
}

#[derive(Debug, Serialize)]
struct HeatmapResponse {
    rows: Vec<String>,
    cols: Vec<String>,
    /// cells[row][col]
    cells: Vec<Vec<f64>>,
}

fn heatmap_inner(request_json: &str) -> Result<String, String> {
    let req: ExperimentRequest = serde_json::from_str(request_json).map_err(|e| e.to_string())?;
    let params = req.params.to_generator();
    let (cohort, _) = generate(&params).map_err(|e| e.to_string())?;
    let classifier = ClassifierKind::parse(&req.classifier)
        .ok_or_else(|| format!("unknown classifier {:?}", req.classifier))?;
    let rows = ["avg_features", "avg_proba", "concatenate", "max_features", "max_votes"];
    let cols = [TemporalMode::Concatenate, TemporalMode::Difference];
    let mut cells = Vec::new();
    for row in rows {
        let mut line = Vec::new();
        for mode in cols {
            let mut config = match row {
                "avg_features" => ExperimentConfig::all_views(FeatureFusion::Average, classifier, params.seed),
                "max_features" => ExperimentConfig::all_views(FeatureFusion::Max, classifier, params.seed),
                "concatenate" => ExperimentConfig::all_views(FeatureFusion::Concatenate, classifier, params.seed),
                "avg_proba" => ExperimentConfig::all_views_decision(DecisionFusion::AverageProba, classifier, params.seed),
                _ => ExperimentConfig::all_views_decision(DecisionFusion::MaxVotes, classifier, params.seed),
            };
            config.temporal = mode;
            config.bootstrap_iters = 100;
            let report = nested_cv(&config, &cohort).map_err(|e| e.to_string())?;
            line.push(report.weighted_f1);
        }
        cells.push(line);
    }
    let response = HeatmapResponse {
        rows: rows.iter().map(|s| s.to_string()).collect(),
        cols: vec!["concatenate".to_string(), "difference".to_string()],
        cells,
    };
    serde_json::to_string(&response).map_err(|e| e.to_string())
}

/// Fill the five-fusion-by-two-temporal heatmap for the current knobs.
#[wasm_bindgen]
pub fn fusion_heatmap(request_json: &str) -> Result<String, JsValue> {
    heatmap_inner(request_json).map_err(|e| JsValue::from_str(&e))
}

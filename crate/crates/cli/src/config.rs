//! TOML configuration schemas for `run`, `ablate`, and `synth`, and their
//! conversion into core types. Schema violations report the offending
//! field path.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use prognoses_core::cohort::{FeatureSource, ViewId};
use prognoses_core::evaluation::{BootstrapUnit, ExperimentConfig, ViewSelection};
use prognoses_core::fusion::{DecisionFusion, FeatureFusion, MissingViewPolicy};
use prognoses_core::importance::CountMode;
use prognoses_core::learners::ClassifierKind;
use prognoses_core::synthcohort::{default_view_strengths, GeneratorParams};
use prognoses_core::temporal::{DayPairPolicy, TemporalMode};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub features: PathBuf,
    pub labels: PathBuf,
    pub source: String,
}

impl DataSection {
    pub fn source(&self) -> Result<FeatureSource> {
        FeatureSource::parse(&self.source)
            .ok_or_else(|| anyhow!("data.source: expected \"tsm\" or \"biomarker\", got {:?}", self.source))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub seed: u64,
    pub data: DataSection,
    pub experiment: ExperimentSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub views: String,
    pub temporal: String,
    #[serde(default)]
    pub feature_fusion: Option<String>,
    #[serde(default)]
    pub decision_fusion: Option<String>,
    #[serde(default)]
    pub missing_view_policy: Option<String>,
    #[serde(default)]
    pub cross_lung: bool,
    pub day_policy: String,
    #[serde(default)]
    pub eval_day_filter: Option<Vec<u32>>,
    pub classifiers: Vec<String>,
    #[serde(default)]
    pub class_weight_axis: bool,
    #[serde(default)]
    pub outer_folds: Option<usize>,
    #[serde(default)]
    pub bootstrap_iters: Option<usize>,
    #[serde(default)]
    pub bootstrap_unit: Option<String>,
    #[serde(default)]
    pub importance_mode: Option<String>,
}

pub fn parse_view_selection(s: &str) -> Result<ViewSelection> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(ViewSelection::All);
    }
    ViewId::parse(s)
        .map(ViewSelection::Single)
        .ok_or_else(|| anyhow!("experiment.views: expected L1..R3 or \"all\", got {s:?}"))
}

pub fn parse_temporal(s: &str) -> Result<TemporalMode> {
    match s {
        "difference" => Ok(TemporalMode::Difference),
        "concatenate" => Ok(TemporalMode::Concatenate),
        other => bail!("temporal: expected \"difference\" or \"concatenate\", got {other:?}"),
    }
}

pub fn parse_feature_fusion(s: &str) -> Result<FeatureFusion> {
    match s {
        "average" => Ok(FeatureFusion::Average),
        "max" => Ok(FeatureFusion::Max),
        "concatenate" => Ok(FeatureFusion::Concatenate),
        other => bail!("feature_fusion: expected average|max|concatenate, got {other:?}"),
    }
}

pub fn parse_decision_fusion(s: &str) -> Result<DecisionFusion> {
    match s {
        "max_votes" => Ok(DecisionFusion::MaxVotes),
        "avg_proba" => Ok(DecisionFusion::AverageProba),
        other => bail!("decision_fusion: expected max_votes|avg_proba, got {other:?}"),
    }
}

pub fn parse_day_policy(s: &str) -> Result<DayPairPolicy> {
    match s {
        "first_pair" => Ok(DayPairPolicy::FirstPair),
        "all_sequential" => Ok(DayPairPolicy::AllSequentialPairs),
        other => bail!("day_policy: expected first_pair|all_sequential, got {other:?}"),
    }
}

pub fn parse_classifier(s: &str) -> Result<ClassifierKind> {
    ClassifierKind::parse(s).ok_or_else(|| {
        anyhow!("classifier: expected decision_tree|random_forest|svm|mlp|mlp_large, got {s:?}")
    })
}

impl ExperimentSection {
    pub fn to_config(&self, seed: u64) -> Result<ExperimentConfig> {
        let views = parse_view_selection(&self.views)?;
        let temporal = parse_temporal(&self.temporal)?;
        let feature_fusion = self
            .feature_fusion
            .as_deref()
            .map(parse_feature_fusion)
            .transpose()?;
        let decision_fusion = self
            .decision_fusion
            .as_deref()
            .map(parse_decision_fusion)
            .transpose()?;
        let missing_view_policy = match self.missing_view_policy.as_deref() {
            None | Some("skip") => MissingViewPolicy::Skip,
            Some("zero_impute") => MissingViewPolicy::ZeroImpute,
            Some(other) => bail!("missing_view_policy: expected skip|zero_impute, got {other:?}"),
        };
        let day_policy = parse_day_policy(&self.day_policy)?;
        let eval_day_filter = match &self.eval_day_filter {
            None => None,
            Some(v) if v.len() == 2 && v[0] < v[1] => Some((v[0], v[1])),
            Some(v) => bail!("eval_day_filter: expected [day_a, day_b] with day_a < day_b, got {v:?}"),
        };
        let classifiers = self
            .classifiers
            .iter()
            .map(|s| parse_classifier(s))
            .collect::<Result<Vec<_>>>()?;
        let bootstrap_unit = match self.bootstrap_unit.as_deref() {
            None | Some("prediction") => BootstrapUnit::Prediction,
            Some("patient") => BootstrapUnit::Patient,
            Some(other) => bail!("bootstrap_unit: expected prediction|patient, got {other:?}"),
        };
        let config = ExperimentConfig {
            views,
            temporal,
            feature_fusion,
            decision_fusion,
            missing_view_policy,
            cross_lung: self.cross_lung,
            day_policy,
            eval_day_filter,
            classifiers,
            class_weight_axis: self.class_weight_axis,
            outer_folds: self.outer_folds.unwrap_or(5),
            bootstrap_iters: self.bootstrap_iters.unwrap_or(2000),
            bootstrap_unit,
            seed,
        };
        config.validate().map_err(|e| anyhow!("{e}"))?;
        Ok(config)
    }

    pub fn importance_mode(&self) -> Result<CountMode> {
        match self.importance_mode.as_deref() {
            None => Ok(CountMode::SplitNodes),
            Some(s) => CountMode::parse(s).ok_or_else(|| {
                anyhow!("importance_mode: expected split_nodes|unique_per_tree|impurity_weighted, got {s:?}")
            }),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblateConfigFile {
    pub seed: u64,
    /// Classifier driving the single-classifier exhibits (fig3, fig4,
    /// fig5, table2); the view-by-classifier tables always span all five.
    #[serde(default)]
    pub classifier: Option<String>,
    pub data: DataSection,
    /// Optional second dataset holding biomarker-prediction features for
    /// the biomarker table.
    #[serde(default)]
    pub biomarker_data: Option<DataSection>,
    #[serde(default)]
    pub ablate: AblateSection,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AblateSection {
    #[serde(default)]
    pub exhibits: Option<Vec<String>>,
    /// Day-pair policy applied to every exhibit except the day-pair table,
    /// whose columns fix their own policies.
    #[serde(default)]
    pub day_policy: Option<String>,
    #[serde(default)]
    pub bootstrap_iters: Option<usize>,
    #[serde(default)]
    pub outer_folds: Option<usize>,
}

pub const ALL_EXHIBITS: [&str; 6] = ["table1", "fig3", "fig4", "fig5", "table2", "table3"];

impl AblateConfigFile {
    pub fn exhibit_classifier(&self) -> Result<ClassifierKind> {
        match self.classifier.as_deref() {
            None => Ok(ClassifierKind::Mlp),
            Some(s) => parse_classifier(s),
        }
    }

    pub fn exhibits(&self) -> Result<Vec<String>> {
        let list = match &self.ablate.exhibits {
            Some(list) => list.clone(),
            None => {
                let mut all: Vec<String> =
                    ALL_EXHIBITS.iter().map(|s| s.to_string()).collect();
                if self.biomarker_data.is_none() {
                    all.retain(|e| e != "table3");
                }
                all
            }
        };
        for e in &list {
            if !ALL_EXHIBITS.contains(&e.as_str()) {
                bail!("ablate.exhibits: unknown exhibit {e:?} (expected one of {ALL_EXHIBITS:?})");
            }
            if e == "table3" && self.biomarker_data.is_none() {
                bail!("ablate.exhibits: table3 requires a [biomarker_data] section");
            }
        }
        Ok(list)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfigFile {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub n_patients: Option<usize>,
    #[serde(default)]
    pub prevalence: Option<f64>,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub days: Option<Vec<u32>>,
    #[serde(default)]
    pub trajectory_effect: Option<f64>,
    #[serde(default)]
    pub noise_sigma: Option<f64>,
    #[serde(default)]
    pub static_effect: Option<f64>,
    #[serde(default)]
    pub view_strength: Option<BTreeMap<String, f64>>,
    pub seed: u64,
}

impl SynthConfigFile {
    pub fn to_params(&self) -> Result<GeneratorParams> {
        let mut params = match self.preset.as_deref() {
            None => GeneratorParams::new(self.seed),
            Some("easy") => GeneratorParams::easy_preset(self.seed),
            Some("trajectory") => GeneratorParams::trajectory_preset(self.seed),
            Some("null") => GeneratorParams::null_preset(self.seed),
            Some(other) => bail!("preset: expected easy|trajectory|null, got {other:?}"),
        };
        params.seed = self.seed;
        if let Some(n) = self.n_patients {
            params.n_patients = n;
        }
        if let Some(p) = self.prevalence {
            params.prevalence = p;
        }
        if let Some(d) = self.dim {
            params.dim = d;
        }
        if let Some(days) = &self.days {
            params.days = days.clone();
        }
        if let Some(t) = self.trajectory_effect {
            params.trajectory_effect = t;
        }
        if let Some(s) = self.noise_sigma {
            params.noise_sigma = s;
        }
        if let Some(m) = self.static_effect {
            params.static_effect = m;
        }
        if let Some(map) = &self.view_strength {
            let mut strengths = default_view_strengths();
            for (name, value) in map {
                let view = ViewId::parse(name)
                    .ok_or_else(|| anyhow!("view_strength: unknown view {name:?}"))?;
                strengths.insert(view, *value);
            }
            params.view_strength = strengths;
        }
        params.validate().map_err(|e| anyhow!("{e}"))?;
        Ok(params)
    }
}

pub fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

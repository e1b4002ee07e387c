//! Subcommand implementations. Every command is idempotent for identical
//! inputs and seed (timestamps live only in the manifest).

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use prognoses_core::cohort::{load_cohort, missing_view_report, summarize, Cohort};
use prognoses_core::evaluation::{nested_cv, EvaluationReport};
use prognoses_core::importance::{
    export_radar, profile, split_counts_mode, BiomarkerGrouping, CountMode,
};
use prognoses_core::learners::ClassifierKind;
use prognoses_core::synthcohort::generate;

use crate::config::{
    read_toml, AblateConfigFile, RunConfigFile, SynthConfigFile,
};
use crate::exhibits::{self, AblationSettings};
use crate::manifest::ManifestBuilder;
use crate::Verbosity;

/// Validates a features/labels pair and prints the cohort summary plus
/// per-patient completeness warnings.
pub fn cmd_validate(
    features: &Path,
    labels: &Path,
    source: &str,
    verbosity: Verbosity,
) -> Result<()> {
    let source = prognoses_core::cohort::FeatureSource::parse(source)
        .ok_or_else(|| anyhow!("--source: expected \"tsm\" or \"biomarker\", got {source:?}"))?;
    let cohort = load_cohort(features, labels, source).map_err(|e| anyhow!("{e}"))?;
    println!("{}", summarize(&cohort));
    if verbosity >= Verbosity::Info {
        for note in missing_view_report(&cohort) {
            eprintln!("warning: {note}");
        }
    }
    Ok(())
}

/// Generates a synthetic cohort: features JSONL, labels CSV, and the
/// ground-truth document.
pub fn cmd_synth(config_path: &Path, out_dir: &Path) -> Result<()> {
    let file: SynthConfigFile = read_toml(config_path)?;
    let params = file.to_params()?;
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let (cohort, truth) = generate(&params).map_err(|e| anyhow!("{e}"))?;

    let features = out_dir.join("features.jsonl");
    let labels = out_dir.join("labels.csv");
    cohort
        .write_files(&features, &labels)
        .map_err(|e| anyhow!("{e}"))?;
    let truth_path = out_dir.join("ground_truth.json");
    std::fs::write(&truth_path, serde_json::to_string_pretty(&truth)?)
        .with_context(|| format!("writing {}", truth_path.display()))?;

    let mut manifest = ManifestBuilder::new(config_path, params.seed)?;
    manifest.add(&features)?;
    manifest.add(&labels)?;
    manifest.add(&truth_path)?;
    manifest.write(out_dir)?;

    let summary = summarize(&cohort);
    println!(
        "generated {} records for {} patients ({} positive) into {}",
        summary.total_records,
        summary.patients,
        summary.positives,
        out_dir.display()
    );
    Ok(())
}

/// Serializable view of an evaluation report plus provenance.
#[derive(serde::Serialize)]
struct RunReportFile<'a> {
    config_digest: &'a str,
    tool_version: &'a str,
    #[serde(flatten)]
    report: &'a EvaluationReport,
}

fn write_predictions_csv(report: &EvaluationReport, path: &Path) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    writer.write_record(["patient_id", "view", "day_a", "day_b", "y_true", "proba", "y_pred"])?;
    for p in &report.predictions {
        writer.write_record([
            p.patient_id.as_str(),
            p.view.as_str(),
            &p.day_a.to_string(),
            &p.day_b.to_string(),
            &u8::from(p.y_true).to_string(),
            &p.proba.to_string(),
            &u8::from(p.y_pred).to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Runs one experiment config: report.json, predictions.csv, and (for
/// forest runs) per-fold models plus importance counts.
pub fn cmd_run(
    config_path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
    verbosity: Verbosity,
) -> Result<()> {
    let file: RunConfigFile = read_toml(config_path)?;
    let seed = seed_override.unwrap_or(file.seed);
    let config = file.experiment.to_config(seed)?;
    let importance_mode = file.experiment.importance_mode()?;
    let source = file.data.source()?;
    let cohort = load_cohort(&file.data.features, &file.data.labels, source)
        .map_err(|e| anyhow!("{e}"))?;

    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let mut manifest = ManifestBuilder::new(config_path, seed)?;

    let report = nested_cv(&config, &cohort).map_err(|e| anyhow!("run failed: {e}"))?;
    if verbosity >= Verbosity::Info {
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
    }

    let report_path = out_dir.join("report.json");
    let file_view = RunReportFile {
        config_digest: manifest.config_digest(),
        tool_version: env!("CARGO_PKG_VERSION"),
        report: &report,
    };
    std::fs::write(&report_path, serde_json::to_string_pretty(&file_view)?)
        .with_context(|| format!("writing {}", report_path.display()))?;
    manifest.add(&report_path)?;

    let predictions_path = out_dir.join("predictions.csv");
    write_predictions_csv(&report, &predictions_path)?;
    manifest.add(&predictions_path)?;

    // Forest runs additionally persist the refit models and their split
    // counts for the importance pipeline. Decision-fusion runs hold one
    // model per view and are not exported.
    if config.classifiers.contains(&ClassifierKind::RandomForest)
        && config.decision_fusion.is_none()
    {
        let models_dir = out_dir.join("models");
        std::fs::create_dir_all(&models_dir)?;
        let counts_path = out_dir.join("importance_counts.csv");
        let mut writer = csv::Writer::from_path(&counts_path)
            .with_context(|| format!("writing {}", counts_path.display()))?;
        writer.write_record(["fold", "feature_index", "count"])?;
        let mut wrote_counts = false;
        for fold in &report.per_fold {
            if fold.selected_kind != ClassifierKind::RandomForest {
                continue;
            }
            let model = refit_forest_for_fold(&config, &cohort, &report, fold.fold)?;
            let model_path = models_dir.join(format!("fold_{}.json", fold.fold));
            std::fs::write(&model_path, model.to_json())?;
            manifest.add(&model_path)?;
            let counts = split_counts_mode(model.as_forest().map_err(|e| anyhow!("{e}"))?, importance_mode);
            for (idx, count) in counts.iter().enumerate() {
                writer.write_record([
                    &fold.fold.to_string(),
                    &idx.to_string(),
                    &count.to_string(),
                ])?;
            }
            wrote_counts = true;
        }
        writer.flush()?;
        if wrote_counts {
            manifest.add(&counts_path)?;
        } else {
            std::fs::remove_file(&counts_path).ok();
            if verbosity >= Verbosity::Info {
                eprintln!("warning: no fold selected a random forest; importance counts skipped");
            }
        }
    }

    manifest.write(out_dir)?;
    println!(
        "f1={:.4} ci=[{:.4},{:.4}] dim={} predictions={}",
        report.weighted_f1,
        report.ci_lo,
        report.ci_hi,
        report.feature_dim,
        report.predictions.len()
    );
    Ok(())
}

/// Rebuilds the refit forest of one outer fold, bit-identical to the one
/// used inside `nested_cv` (same data slice, hyperparameters, and seed).
fn refit_forest_for_fold(
    config: &prognoses_core::evaluation::ExperimentConfig,
    cohort: &Cohort,
    report: &EvaluationReport,
    fold: usize,
) -> Result<prognoses_core::learners::TrainedModel> {
    let detail = report
        .per_fold
        .iter()
        .find(|f| f.fold == fold)
        .ok_or_else(|| anyhow!("fold {fold} missing from report"))?;
    let model = prognoses_core::evaluation::refit_model(config, cohort, &report.fold_plan, detail)
        .map_err(|e| anyhow!("{e}"))?;
    Ok(model)
}

/// Runs the full ablation grid and writes exhibit CSVs plus aligned
/// text tables.
pub fn cmd_ablate(
    config_path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
    jobs: usize,
    verbosity: Verbosity,
) -> Result<()> {
    let file: AblateConfigFile = read_toml(config_path)?;
    let seed = seed_override.unwrap_or(file.seed);
    let exhibits_list = file.exhibits()?;
    let settings = AblationSettings {
        seed,
        exhibit_classifier: file.exhibit_classifier()?,
        day_policy: match file.ablate.day_policy.as_deref() {
            None => prognoses_core::temporal::DayPairPolicy::FirstPair,
            Some(s) => crate::config::parse_day_policy(s)?,
        },
        bootstrap_iters: file.ablate.bootstrap_iters.unwrap_or(2000),
        outer_folds: file.ablate.outer_folds.unwrap_or(5),
    };
    let main = load_cohort(&file.data.features, &file.data.labels, file.data.source()?)
        .map_err(|e| anyhow!("{e}"))?;
    let biomarker: Option<Cohort> = match &file.biomarker_data {
        Some(section) => Some(
            load_cohort(&section.features, &section.labels, section.source()?)
                .map_err(|e| anyhow!("{e}"))?,
        ),
        None => None,
    };

    let plan = exhibits::plan(&exhibits_list, &settings);
    if verbosity >= Verbosity::Info {
        eprintln!(
            "running {} cells across {} exhibits with {} jobs",
            plan.cells.len(),
            exhibits_list.len(),
            jobs.max(1)
        );
    }
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let results = exhibits::run_cells(&plan, &main, biomarker.as_ref(), jobs)?;
    let emitted = exhibits::write_exhibits(&plan, &results, out_dir)?;

    let mut manifest = ManifestBuilder::new(config_path, seed)?;
    for path in &emitted {
        manifest.add(path)?;
    }
    manifest.write(out_dir)?;
    println!(
        "wrote {} exhibit files to {}",
        emitted.len(),
        out_dir.display()
    );
    Ok(())
}

/// Aggregates per-fold importance counts into a radar CSV.
pub fn cmd_importance(
    counts_path: &Path,
    grouping_path: Option<&Path>,
    out_path: &Path,
    mode: &str,
) -> Result<()> {
    // Mode is recorded for traceability; counts files already carry the
    // mode they were computed with.
    if CountMode::parse(mode).is_none() {
        bail!("--mode: expected split_nodes|unique_per_tree|impurity_weighted, got {mode:?}");
    }
    let grouping = match grouping_path {
        Some(path) => BiomarkerGrouping::load(path).map_err(|e| anyhow!("{e}"))?,
        None => BiomarkerGrouping::placeholder(),
    };
    let mut per_fold: BTreeMap<usize, BTreeMap<usize, f64>> = BTreeMap::new();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(counts_path)
        .with_context(|| format!("reading {}", counts_path.display()))?;
    for (idx, row) in reader.records().enumerate() {
        let row = row.with_context(|| format!("counts row {}", idx + 2))?;
        if row.len() != 3 {
            bail!("counts row {}: expected fold,feature_index,count", idx + 2);
        }
        let fold: usize = row[0].parse().context("fold column")?;
        let feature: usize = row[1].parse().context("feature_index column")?;
        let count: f64 = row[2].parse().context("count column")?;
        per_fold.entry(fold).or_default().insert(feature, count);
    }
    if per_fold.is_empty() {
        bail!("counts file {} holds no rows", counts_path.display());
    }
    let dim = per_fold
        .values()
        .flat_map(|m| m.keys())
        .max()
        .map(|m| m + 1)
        .unwrap_or(0);
    let counts: Vec<Vec<f64>> = per_fold
        .values()
        .map(|m| (0..dim).map(|i| m.get(&i).copied().unwrap_or(0.0)).collect())
        .collect();
    let prof = profile(&counts, &grouping).map_err(|e| anyhow!("{e}"))?;
    export_radar(&prof, out_path).map_err(|e| anyhow!("{e}"))?;
    println!(
        "wrote {} groups (max avg frequency {:.4}) to {}",
        prof.groups.len(),
        prof.max_frequency,
        out_path.display()
    );
    Ok(())
}

/// Writes the shipped placeholder grouping next to a user's data.
pub fn write_placeholder_grouping(path: &Path) -> Result<()> {
    BiomarkerGrouping::placeholder()
        .save(path)
        .map_err(|e| anyhow!("{e}"))
}

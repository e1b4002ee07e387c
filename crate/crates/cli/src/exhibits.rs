//! Ablation exhibits: each cell is one full nested
//! cross-validation run, scheduled concurrently up to the `--jobs` limit.
//!
//! Cell seeds derive from the manifest seed plus the exhibit and row
//! names, so every column of a row shares one fold plan and parallelism
//! never changes results. Output assembly is serialized and emits both a
//! machine CSV and an aligned plain-text rendering per exhibit.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;

use prognoses_core::cohort::{Cohort, ViewId};
use prognoses_core::evaluation::{
    format_f1_ci, nested_cv, ExperimentConfig, ViewSelection,
};
use prognoses_core::fusion::{DecisionFusion, FeatureFusion};
use prognoses_core::learners::ClassifierKind;
use prognoses_core::rng::{derive_seed, stable_str_hash};
use prognoses_core::temporal::{DayPairPolicy, TemporalMode};

pub const VIEW_ROWS: [(ViewId, &str); 6] = [
    (ViewId::L1, "Left-1"),
    (ViewId::L2, "Left-2"),
    (ViewId::L3, "Left-3"),
    (ViewId::R1, "Right-1"),
    (ViewId::R2, "Right-2"),
    (ViewId::R3, "Right-3"),
];

pub const FUSION_ROWS: [&str; 5] = [
    "avg_features",
    "avg_proba",
    "concatenate",
    "max_features",
    "max_votes",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKey {
    Main,
    Biomarker,
}

/// One ablation cell: exhibit coordinates plus the experiment to run.
pub struct Cell {
    pub exhibit: &'static str,
    pub row: String,
    pub col: String,
    pub dataset: DatasetKey,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, Copy)]
pub struct CellResult {
    pub f1: f64,
    pub lo: f64,
    pub hi: f64,
}

pub struct AblationPlan {
    pub cells: Vec<Cell>,
    pub exhibits: Vec<String>,
}

pub struct AblationSettings {
    pub seed: u64,
    pub exhibit_classifier: ClassifierKind,
    pub day_policy: DayPairPolicy,
    pub bootstrap_iters: usize,
    pub outer_folds: usize,
}

fn row_seed(settings: &AblationSettings, exhibit: &str, row: &str) -> u64 {
    derive_seed(settings.seed, &[stable_str_hash(exhibit), stable_str_hash(row)])
}

fn base_config(settings: &AblationSettings, classifier: ClassifierKind, seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::single_view(ViewId::L1, classifier, seed);
    c.day_policy = settings.day_policy;
    c.bootstrap_iters = settings.bootstrap_iters;
    c.outer_folds = settings.outer_folds;
    c
}

fn view_config(
    settings: &AblationSettings,
    view: ViewId,
    classifier: ClassifierKind,
    seed: u64,
) -> ExperimentConfig {
    let mut c = base_config(settings, classifier, seed);
    c.views = ViewSelection::Single(view);
    c
}

fn all_views_config(
    settings: &AblationSettings,
    fusion: FeatureFusion,
    classifier: ClassifierKind,
    seed: u64,
) -> ExperimentConfig {
    let mut c = base_config(settings, classifier, seed);
    c.views = ViewSelection::All;
    c.feature_fusion = Some(fusion);
    c
}

/// Builds the cell list for the requested exhibits.
pub fn plan(exhibits: &[String], settings: &AblationSettings) -> AblationPlan {
    let mut cells = Vec::new();
    for exhibit in exhibits {
        match exhibit.as_str() {
            "table1" => plan_view_classifier_table(
                "table1",
                DatasetKey::Main,
                settings,
                &mut cells,
            ),
            "fig3" => plan_fusion_heatmap(settings, &mut cells),
            "fig4" => plan_temporal_bars(settings, &mut cells),
            "fig5" => plan_crosslung_bars(settings, &mut cells),
            "table2" => plan_daypair_table(settings, &mut cells),
            "table3" => plan_biomarker_table(settings, &mut cells),
            other => unreachable!("exhibit list validated earlier: {other}"),
        }
    }
    AblationPlan { cells, exhibits: exhibits.to_vec() }
}

/// Rows = six views + All Views (concatenated); columns = five
/// classifiers. Day 1 vs day 2 pairs, temporal difference, no pooling.
fn plan_view_classifier_table(
    exhibit: &'static str,
    dataset: DatasetKey,
    settings: &AblationSettings,
    cells: &mut Vec<Cell>,
) {
    for (view, row_label) in VIEW_ROWS {
        let seed = row_seed(settings, exhibit, row_label);
        for kind in ClassifierKind::ALL {
            cells.push(Cell {
                exhibit,
                row: row_label.to_string(),
                col: kind.table_label().to_string(),
                dataset,
                config: view_config(settings, view, kind, seed),
            });
        }
    }
    let seed = row_seed(settings, exhibit, "All Views");
    for kind in ClassifierKind::ALL {
        cells.push(Cell {
            exhibit,
            row: "All Views".to_string(),
            col: kind.table_label().to_string(),
            dataset,
            config: all_views_config(settings, FeatureFusion::Concatenate, kind, seed),
        });
    }
}

/// Five fusion strategies by two temporal representations, all views.
fn plan_fusion_heatmap(settings: &AblationSettings, cells: &mut Vec<Cell>) {
    let classifier = settings.exhibit_classifier;
    for row in FUSION_ROWS {
        let seed = row_seed(settings, "fig3", row);
        for (mode, col) in [
            (TemporalMode::Concatenate, "concatenate"),
            (TemporalMode::Difference, "difference"),
        ] {
            let mut config = match row {
                "avg_features" => {
                    all_views_config(settings, FeatureFusion::Average, classifier, seed)
                }
                "max_features" => all_views_config(settings, FeatureFusion::Max, classifier, seed),
                "concatenate" => {
                    all_views_config(settings, FeatureFusion::Concatenate, classifier, seed)
                }
                "avg_proba" | "max_votes" => {
                    let mut c = base_config(settings, classifier, seed);
                    c.views = ViewSelection::All;
                    c.decision_fusion = Some(if row == "avg_proba" {
                        DecisionFusion::AverageProba
                    } else {
                        DecisionFusion::MaxVotes
                    });
                    c
                }
                _ => unreachable!(),
            };
            config.temporal = mode;
            cells.push(Cell {
                exhibit: "fig3",
                row: row.to_string(),
                col: col.to_string(),
                dataset: DatasetKey::Main,
                config,
            });
        }
    }
}

/// Per-view F1 under temporal concatenation vs difference.
fn plan_temporal_bars(settings: &AblationSettings, cells: &mut Vec<Cell>) {
    let classifier = settings.exhibit_classifier;
    let rows: Vec<(Option<ViewId>, &str)> = VIEW_ROWS
        .iter()
        .map(|(v, label)| (Some(*v), *label))
        .chain([(None, "All Views")])
        .collect();
    for (view, row_label) in rows {
        let seed = row_seed(settings, "fig4", row_label);
        for (mode, col) in [
            (TemporalMode::Concatenate, "concatenate"),
            (TemporalMode::Difference, "difference"),
        ] {
            let mut config = match view {
                Some(v) => view_config(settings, v, classifier, seed),
                None => all_views_config(settings, FeatureFusion::Concatenate, classifier, seed),
            };
            config.temporal = mode;
            cells.push(Cell {
                exhibit: "fig4",
                row: row_label.to_string(),
                col: col.to_string(),
                dataset: DatasetKey::Main,
                config,
            });
        }
    }
}

/// Cross-lung pooling on vs off per view. Pooling does not apply to the
/// fused all-views model, so that row carries the same run in both
/// columns, matching the unchanged multi-view bar in the source exhibit.
fn plan_crosslung_bars(settings: &AblationSettings, cells: &mut Vec<Cell>) {
    let classifier = settings.exhibit_classifier;
    for (view, row_label) in VIEW_ROWS {
        let seed = row_seed(settings, "fig5", row_label);
        for (pool, col) in [(false, "no_pool"), (true, "pool")] {
            let mut config = view_config(settings, view, classifier, seed);
            config.cross_lung = pool;
            cells.push(Cell {
                exhibit: "fig5",
                row: row_label.to_string(),
                col: col.to_string(),
                dataset: DatasetKey::Main,
                config,
            });
        }
    }
    let seed = row_seed(settings, "fig5", "All Views");
    for col in ["no_pool", "pool"] {
        cells.push(Cell {
            exhibit: "fig5",
            row: "All Views".to_string(),
            col: col.to_string(),
            dataset: DatasetKey::Main,
            config: all_views_config(settings, FeatureFusion::Concatenate, classifier, seed),
        });
    }
}

/// Single-day model vs all-days model evaluated on day 1-2 pairs vs all
/// pairs.
fn plan_daypair_table(settings: &AblationSettings, cells: &mut Vec<Cell>) {
    let classifier = settings.exhibit_classifier;
    let rows: Vec<(Option<ViewId>, &str)> = VIEW_ROWS
        .iter()
        .map(|(v, label)| (Some(*v), *label))
        .chain([(None, "All Views")])
        .collect();
    for (view, row_label) in rows {
        let seed = row_seed(settings, "table2", row_label);
        let make = |settings: &AblationSettings| match view {
            Some(v) => view_config(settings, v, classifier, seed),
            None => all_views_config(settings, FeatureFusion::Concatenate, classifier, seed),
        };
        let mut single_day = make(settings);
        single_day.day_policy = DayPairPolicy::FirstPair;
        let mut all_days_day12 = make(settings);
        all_days_day12.day_policy = DayPairPolicy::AllSequentialPairs;
        all_days_day12.eval_day_filter = Some((1, 2));
        let mut all_days_all = make(settings);
        all_days_all.day_policy = DayPairPolicy::AllSequentialPairs;
        for (config, col) in [
            (single_day, "day12_single_day_model"),
            (all_days_day12, "day12_all_days_model"),
            (all_days_all, "all_days_all_days_model"),
        ] {
            cells.push(Cell {
                exhibit: "table2",
                row: row_label.to_string(),
                col: col.to_string(),
                dataset: DatasetKey::Main,
                config,
            });
        }
    }
}

/// Biomarker-feature runs for the top views and the fused configuration,
/// day 1-2 and all-days variants, across all five classifiers.
fn plan_biomarker_table(settings: &AblationSettings, cells: &mut Vec<Cell>) {
    let variants: [(Option<ViewId>, &str); 6] = [
        (Some(ViewId::L3), "Left-3 (Day 1 vs Day 2)"),
        (Some(ViewId::L3), "Left-3 (All Days)"),
        (Some(ViewId::R3), "Right-3 (Day 1 vs Day 2)"),
        (Some(ViewId::R3), "Right-3 (All Days)"),
        (None, "All Views (Day 1 vs Day 2)"),
        (None, "All Views (All Days)"),
    ];
    for (view, row_label) in variants {
        let seed = row_seed(settings, "table3", row_label);
        let all_days = row_label.contains("All Days");
        for kind in ClassifierKind::ALL {
            let mut config = match view {
                Some(v) => view_config(settings, v, kind, seed),
                None => all_views_config(settings, FeatureFusion::Concatenate, kind, seed),
            };
            config.day_policy = if all_days {
                DayPairPolicy::AllSequentialPairs
            } else {
                DayPairPolicy::FirstPair
            };
            cells.push(Cell {
                exhibit: "table3",
                row: row_label.to_string(),
                col: kind.table_label().to_string(),
                dataset: DatasetKey::Biomarker,
                config,
            });
        }
    }
}

pub type CellKey = (String, String, String);

/// Runs every cell, up to `jobs` in parallel. Any failing cell aborts the
/// whole ablation naming its coordinates.
pub fn run_cells(
    plan: &AblationPlan,
    main: &Cohort,
    biomarker: Option<&Cohort>,
    jobs: usize,
) -> Result<BTreeMap<CellKey, CellResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("building thread pool")?;
    let results: Result<Vec<(CellKey, CellResult)>> = pool.install(|| {
        plan.cells
            .par_iter()
            .map(|cell| {
                let cohort = match cell.dataset {
                    DatasetKey::Main => main,
                    DatasetKey::Biomarker => biomarker
                        .ok_or_else(|| anyhow!("biomarker dataset missing for table3"))?,
                };
                let report = nested_cv(&cell.config, cohort).map_err(|e| {
                    anyhow!(
                        "cell {}[{}][{}] failed: {e}",
                        cell.exhibit,
                        cell.row,
                        cell.col
                    )
                })?;
                Ok((
                    (cell.exhibit.to_string(), cell.row.clone(), cell.col.clone()),
                    CellResult { f1: report.weighted_f1, lo: report.ci_lo, hi: report.ci_hi },
                ))
            })
            .collect()
    });
    Ok(results?.into_iter().collect())
}

// ---------------------------------------------------------------------------
// Output rendering
// ---------------------------------------------------------------------------

struct TableSpec {
    file_stem: &'static str,
    row_header: &'static str,
    rows: Vec<String>,
    cols: Vec<String>,
    /// cell text per (row, col)
    render: Box<dyn Fn(&CellResult) -> String>,
}

fn write_table(
    spec: &TableSpec,
    exhibit: &str,
    results: &BTreeMap<CellKey, CellResult>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let mut grid: Vec<Vec<String>> = Vec::new();
    let mut header = vec![spec.row_header.to_string()];
    header.extend(spec.cols.clone());
    grid.push(header);
    for row in &spec.rows {
        let mut line = vec![row.clone()];
        for col in &spec.cols {
            let key = (exhibit.to_string(), row.clone(), col.clone());
            let cell = results
                .get(&key)
                .ok_or_else(|| anyhow!("missing result for {exhibit}[{row}][{col}]"))?;
            line.push((spec.render)(cell));
        }
        grid.push(line);
    }

    let csv_path = out_dir.join(format!("{}.csv", spec.file_stem));
    let mut writer = csv::Writer::from_path(&csv_path)
        .with_context(|| format!("writing {}", csv_path.display()))?;
    for line in &grid {
        writer.write_record(line)?;
    }
    writer.flush()?;

    // Aligned plain-text rendering for eyeballing.
    let widths: Vec<usize> = (0..grid[0].len())
        .map(|c| grid.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut text = String::new();
    for line in &grid {
        let mut rendered: Vec<String> = Vec::new();
        for (value, width) in line.iter().zip(&widths) {
            rendered.push(format!("{value:<width$}"));
        }
        text.push_str(rendered.join("  ").trim_end());
        text.push('\n');
    }
    let txt_path = out_dir.join(format!("{}.txt", spec.file_stem));
    std::fs::write(&txt_path, text).with_context(|| format!("writing {}", txt_path.display()))?;
    Ok(vec![csv_path, txt_path])
}

fn fmt_ci(cell: &CellResult) -> String {
    format_f1_ci(cell.f1, cell.lo, cell.hi)
}

fn fmt_f1(cell: &CellResult) -> String {
    format!("{:.4}", cell.f1)
}

fn fmt_triplet(cell: &CellResult) -> String {
    format!("{:.4};{:.4};{:.4}", cell.f1, cell.lo, cell.hi)
}

/// Writes CSVs and text renderings for every exhibit present in the plan.
/// Returns the emitted paths.
pub fn write_exhibits(
    plan: &AblationPlan,
    results: &BTreeMap<CellKey, CellResult>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let view_rows = || {
        VIEW_ROWS
            .iter()
            .map(|(_, l)| l.to_string())
            .chain(["All Views".to_string()])
            .collect::<Vec<_>>()
    };
    let classifier_cols = || {
        ClassifierKind::ALL
            .iter()
            .map(|k| k.table_label().to_string())
            .collect::<Vec<_>>()
    };
    let mut emitted = Vec::new();
    for exhibit in &plan.exhibits {
        let spec = match exhibit.as_str() {
            "table1" => TableSpec {
                file_stem: "table1_view_classifier",
                row_header: "view",
                rows: view_rows(),
                cols: classifier_cols(),
                render: Box::new(fmt_ci),
            },
            "fig3" => TableSpec {
                file_stem: "fig3_fusion_heatmap",
                row_header: "fusion",
                rows: FUSION_ROWS.iter().map(|s| s.to_string()).collect(),
                cols: vec!["concatenate".to_string(), "difference".to_string()],
                render: Box::new(fmt_f1),
            },
            "fig4" => TableSpec {
                file_stem: "fig4_temporal_bars",
                row_header: "view",
                rows: view_rows(),
                cols: vec!["concatenate".to_string(), "difference".to_string()],
                render: Box::new(fmt_triplet),
            },
            "fig5" => TableSpec {
                file_stem: "fig5_crosslung_bars",
                row_header: "view",
                rows: view_rows(),
                cols: vec!["no_pool".to_string(), "pool".to_string()],
                render: Box::new(fmt_triplet),
            },
            "table2" => TableSpec {
                file_stem: "table2_daypair",
                row_header: "view",
                rows: view_rows(),
                cols: vec![
                    "day12_single_day_model".to_string(),
                    "day12_all_days_model".to_string(),
                    "all_days_all_days_model".to_string(),
                ],
                render: Box::new(fmt_ci),
            },
            "table3" => TableSpec {
                file_stem: "table3_biomarker",
                row_header: "config",
                rows: vec![
                    "Left-3 (Day 1 vs Day 2)".to_string(),
                    "Left-3 (All Days)".to_string(),
                    "Right-3 (Day 1 vs Day 2)".to_string(),
                    "Right-3 (All Days)".to_string(),
                    "All Views (Day 1 vs Day 2)".to_string(),
                    "All Views (All Days)".to_string(),
                ],
                cols: classifier_cols(),
                render: Box::new(fmt_ci),
            },
            other => unreachable!("exhibit list validated earlier: {other}"),
        };
        emitted.extend(write_table(&spec, exhibit, results, out_dir)?);
    }
    Ok(emitted)
}

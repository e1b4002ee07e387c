//! Random-forest feature-selection frequencies aggregated into biomarker
//! groups and exported as radar-plot data.
//!
//! "Selection frequency" defaults to raw split-node counts across all
//! member trees; alternative definitions (unique features per tree,
//! impurity-decrease weighting) are available behind [`CountMode`].

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learners::{ForestModel, LearnError, TrainedModel, TreeNode};

/// The canonical nine biomarker groups, in radar axis order.
pub const CANONICAL_GROUPS: [&str; 9] = [
    "PL Location",
    "B-Line",
    "A-Line",
    "B-Line Origin",
    "PL Thickness",
    "PL Breaks",
    "Consolidation",
    "Effusion",
    "PL Indents",
];

/// How a feature's selection frequency is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CountMode {
    /// Number of internal nodes splitting on the feature (default).
    #[default]
    SplitNodes,
    /// Number of trees in which the feature appears at least once.
    UniquePerTree,
    /// Split counts weighted by the node-size-scaled Gini decrease.
    ImpurityWeighted,
}

impl CountMode {
    pub fn parse(s: &str) -> Option<CountMode> {
        match s {
            "split_nodes" => Some(CountMode::SplitNodes),
            "unique_per_tree" => Some(CountMode::UniquePerTree),
            "impurity_weighted" => Some(CountMode::ImpurityWeighted),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ImportanceError {
    #[error(transparent)]
    NotAForest(#[from] LearnError),
    #[error("grouping references feature index {index} outside 0..{len}")]
    GroupIndexOutOfRange { index: usize, len: usize },
    #[error("grouping row {row} malformed: {err}")]
    MalformedGrouping { row: usize, err: String },
    #[error("grouping is empty")]
    EmptyGrouping,
    #[error("no fold counts supplied")]
    NoFolds,
    #[error("fold count vectors must share one length")]
    RaggedCounts,
    #[error("failed to write {path}: {err}")]
    Io { path: String, err: String },
}

/// Mapping from feature index to biomarker group name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiomarkerGrouping {
    pub group_of: BTreeMap<usize, String>,
}

impl BiomarkerGrouping {
    /// Placeholder grouping shipped with the repo: 38 feature indices
    /// spread over the nine canonical groups in round-robin order. The
    /// real biomarker list comes from the upstream feature extractor, so
    /// deployments supply their own CSV.
    pub fn placeholder() -> BiomarkerGrouping {
        let mut group_of = BTreeMap::new();
        for idx in 0..38 {
            group_of.insert(idx, CANONICAL_GROUPS[idx % 9].to_string());
        }
        BiomarkerGrouping { group_of }
    }

    /// Loads `feature_index,group_name` CSV (with header).
    pub fn load(path: &Path) -> Result<BiomarkerGrouping, ImportanceError> {
        let file = File::open(path).map_err(|e| ImportanceError::Io {
            path: path.display().to_string(),
            err: e.to_string(),
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(file);
        let mut group_of = BTreeMap::new();
        for (idx, row) in reader.records().enumerate() {
            let row_no = idx + 2;
            let row = row.map_err(|e| ImportanceError::MalformedGrouping {
                row: row_no,
                err: e.to_string(),
            })?;
            if row.len() != 2 {
                return Err(ImportanceError::MalformedGrouping {
                    row: row_no,
                    err: format!("expected 2 fields, got {}", row.len()),
                });
            }
            let index: usize = row[0].parse().map_err(|e| ImportanceError::MalformedGrouping {
                row: row_no,
                err: format!("bad feature index: {e}"),
            })?;
            group_of.insert(index, row[1].to_string());
        }
        if group_of.is_empty() {
            return Err(ImportanceError::EmptyGrouping);
        }
        Ok(BiomarkerGrouping { group_of })
    }

    pub fn save(&self, path: &Path) -> Result<(), ImportanceError> {
        let mut f = File::create(path).map_err(|e| ImportanceError::Io {
            path: path.display().to_string(),
            err: e.to_string(),
        })?;
        let write = |f: &mut File, s: &str| {
            f.write_all(s.as_bytes()).map_err(|e| ImportanceError::Io {
                path: path.display().to_string(),
                err: e.to_string(),
            })
        };
        write(&mut f, "feature_index,group_name\n")?;
        for (idx, group) in &self.group_of {
            write(&mut f, &format!("{idx},{group}\n"))?;
        }
        Ok(())
    }

    /// Group names in canonical order first, then any extras alphabetically.
    pub fn ordered_groups(&self) -> Vec<String> {
        let present: BTreeSet<&str> = self.group_of.values().map(|s| s.as_str()).collect();
        let mut out: Vec<String> = CANONICAL_GROUPS
            .iter()
            .filter(|g| present.contains(**g))
            .map(|g| g.to_string())
            .collect();
        for g in &present {
            if !CANONICAL_GROUPS.contains(g) {
                out.push((*g).to_string());
            }
        }
        out
    }
}

/// Per-group average selection frequency across folds, plus the
/// normalization constant (the maximum observed group frequency).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceProfile {
    /// group -> average frequency, in [`BiomarkerGrouping::ordered_groups`] order.
    pub groups: Vec<(String, f64)>,
    pub max_frequency: f64,
}

impl ImportanceProfile {
    pub fn normalized(&self) -> Vec<(String, f64)> {
        self.groups
            .iter()
            .map(|(g, v)| {
                let norm = if self.max_frequency > 0.0 { v / self.max_frequency } else { 0.0 };
                (g.clone(), norm)
            })
            .collect()
    }
}

/// Split counts per feature for a forest, under the given mode.
pub fn split_counts_mode(forest: &ForestModel, mode: CountMode) -> Vec<f64> {
    let mut counts = vec![0.0; forest.n_features];
    match mode {
        CountMode::SplitNodes => {
            for tree in &forest.trees {
                for node in &tree.nodes {
                    if let TreeNode::Split { feature, .. } = node {
                        counts[*feature] += 1.0;
                    }
                }
            }
        }
        CountMode::UniquePerTree => {
            for tree in &forest.trees {
                let mut seen = BTreeSet::new();
                for node in &tree.nodes {
                    if let TreeNode::Split { feature, .. } = node {
                        seen.insert(*feature);
                    }
                }
                for feature in seen {
                    counts[feature] += 1.0;
                }
            }
        }
        CountMode::ImpurityWeighted => {
            for tree in &forest.trees {
                for node in &tree.nodes {
                    if let TreeNode::Split { feature, n_node, impurity_decrease, .. } = node {
                        counts[*feature] += *n_node as f64 * impurity_decrease;
                    }
                }
            }
        }
    }
    counts
}

/// Count of internal nodes splitting on each feature across all trees.
pub fn split_counts(model: &TrainedModel) -> Result<Vec<f64>, ImportanceError> {
    Ok(split_counts_mode(model.as_forest()?, CountMode::SplitNodes))
}

/// Sums member-feature counts per group, averages over folds, and records
/// the maximum group average as the normalization constant.
pub fn profile(
    counts_per_fold: &[Vec<f64>],
    grouping: &BiomarkerGrouping,
) -> Result<ImportanceProfile, ImportanceError> {
    if counts_per_fold.is_empty() {
        return Err(ImportanceError::NoFolds);
    }
    if grouping.group_of.is_empty() {
        return Err(ImportanceError::EmptyGrouping);
    }
    let len = counts_per_fold[0].len();
    if counts_per_fold.iter().any(|c| c.len() != len) {
        return Err(ImportanceError::RaggedCounts);
    }
    if let Some((&index, _)) = grouping.group_of.iter().find(|(&i, _)| i >= len) {
        return Err(ImportanceError::GroupIndexOutOfRange { index, len });
    }

    let order = grouping.ordered_groups();
    let mut sums: BTreeMap<&str, f64> = order.iter().map(|g| (g.as_str(), 0.0)).collect();
    for counts in counts_per_fold {
        for (&idx, group) in &grouping.group_of {
            *sums.get_mut(group.as_str()).expect("group listed") += counts[idx];
        }
    }
    let n_folds = counts_per_fold.len() as f64;
    let groups: Vec<(String, f64)> = order
        .iter()
        .map(|g| (g.clone(), sums[g.as_str()] / n_folds))
        .collect();
    let max_frequency = groups.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    Ok(ImportanceProfile { groups, max_frequency })
}

/// Writes `group,avg_frequency,normalized` rows in canonical group order.
pub fn export_radar(profile: &ImportanceProfile, path: &Path) -> Result<(), ImportanceError> {
    let mut f = File::create(path).map_err(|e| ImportanceError::Io {
        path: path.display().to_string(),
        err: e.to_string(),
    })?;
    let mut out = String::from("group,avg_frequency,normalized\n");
    for ((group, avg), (_, norm)) in profile.groups.iter().zip(profile.normalized()) {
        out.push_str(&format!("{group},{avg},{norm}\n"));
    }
    f.write_all(out.as_bytes()).map_err(|e| ImportanceError::Io {
        path: path.display().to_string(),
        err: e.to_string(),
    })
}

/// Parses a radar CSV back into a profile (round-trip support).
pub fn read_radar(path: &Path) -> Result<ImportanceProfile, ImportanceError> {
    let file = File::open(path).map_err(|e| ImportanceError::Io {
        path: path.display().to_string(),
        err: e.to_string(),
    })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let mut groups = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let row_no = idx + 2;
        let row = row.map_err(|e| ImportanceError::MalformedGrouping {
            row: row_no,
            err: e.to_string(),
        })?;
        let avg: f64 = row[1].parse().map_err(|e| ImportanceError::MalformedGrouping {
            row: row_no,
            err: format!("{e}"),
        })?;
        groups.push((row[0].to_string(), avg));
    }
    let max_frequency = groups.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    Ok(ImportanceProfile { groups, max_frequency })
}

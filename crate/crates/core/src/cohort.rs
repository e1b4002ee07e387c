//! Clinical data model: lung views, feature sources, per-clip records,
//! outcome labels, and validated cohorts.
//!
//! A cohort is loaded from a JSONL features file (one object per clip) and
//! a CSV labels file (`patient_id,readmitted`). Duplicate clips for the
//! same (patient, view, day) are collapsed by element-wise averaging.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The six standardized probe positions. 1 = upper anterior, 2 = lateral,
/// 3 = dependent/posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViewId {
    L1,
    L2,
    L3,
    R1,
    R2,
    R3,
}

impl ViewId {
    /// All views in canonical order (also the concatenation order).
    pub const ALL: [ViewId; 6] = [
        ViewId::L1,
        ViewId::L2,
        ViewId::L3,
        ViewId::R1,
        ViewId::R2,
        ViewId::R3,
    ];

    /// The contralateral view at the same probe position.
    pub fn mirror(self) -> ViewId {
        match self {
            ViewId::L1 => ViewId::R1,
            ViewId::L2 => ViewId::R2,
            ViewId::L3 => ViewId::R3,
            ViewId::R1 => ViewId::L1,
            ViewId::R2 => ViewId::L2,
            ViewId::R3 => ViewId::L3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ViewId::L1 => "L1",
            ViewId::L2 => "L2",
            ViewId::L3 => "L3",
            ViewId::R1 => "R1",
            ViewId::R2 => "R2",
            ViewId::R3 => "R3",
        }
    }

    pub fn parse(s: &str) -> Option<ViewId> {
        match s {
            "L1" => Some(ViewId::L1),
            "L2" => Some(ViewId::L2),
            "L3" => Some(ViewId::L3),
            "R1" => Some(ViewId::R1),
            "R2" => Some(ViewId::R2),
            "R3" => Some(ViewId::R3),
            _ => None,
        }
    }
}

impl fmt::Display for ViewId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where feature vectors come from; fixes the expected dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureSource {
    /// Spatiotemporal video-encoder embeddings, 512-d.
    Encoder,
    /// Predicted interpretable biomarker values, 38-d.
    Biomarker,
}

impl FeatureSource {
    pub fn dim(self) -> usize {
        match self {
            FeatureSource::Encoder => 512,
            FeatureSource::Biomarker => 38,
        }
    }

    /// Wire token used in the JSONL `source` field.
    pub fn token(self) -> &'static str {
        match self {
            FeatureSource::Encoder => "tsm",
            FeatureSource::Biomarker => "biomarker",
        }
    }

    pub fn parse(s: &str) -> Option<FeatureSource> {
        match s {
            "tsm" => Some(FeatureSource::Encoder),
            "biomarker" => Some(FeatureSource::Biomarker),
            _ => None,
        }
    }
}

/// One feature vector for (patient, view, day).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub patient_id: String,
    pub view: ViewId,
    pub day: u32,
    pub source: FeatureSource,
    pub features: Vec<f64>,
}

impl ClipRecord {
    fn validate(&self) -> Result<(), CohortError> {
        if self.day == 0 {
            return Err(CohortError::InvalidDay {
                patient: self.patient_id.clone(),
            });
        }
        if self.features.len() != self.source.dim() {
            return Err(CohortError::DimensionMismatch {
                patient: self.patient_id.clone(),
                expected: self.source.dim(),
                got: self.features.len(),
            });
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(CohortError::NonFiniteFeature {
                patient: self.patient_id.clone(),
            });
        }
        Ok(())
    }
}

/// A patient's binary 30-day readmission outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientOutcome {
    pub patient_id: String,
    pub readmitted_30d: bool,
}

/// Validated collection of clip records plus per-patient outcomes.
///
/// Invariants enforced at construction: every record's patient has an
/// outcome and vice versa, all records share one feature source, and at
/// most one record exists per (patient, view, day). Immutable afterwards;
/// safe to share read-only across workers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    records: Vec<ClipRecord>,
    outcomes: Vec<PatientOutcome>,
    source: FeatureSource,
}

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("failed to read {path}: {err}")]
    Io { path: String, err: String },
    #[error("features line {line}: malformed record: {err}")]
    MalformedLine { line: usize, err: String },
    #[error("features line {line}: unknown view '{view}'")]
    UnknownView { line: usize, view: String },
    #[error("features line {line}: unknown source '{token}'")]
    UnknownSource { line: usize, token: String },
    #[error("features line {line}: vector length {got} does not match source dim {expected}")]
    LineDimension {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("features line {line}: non-finite feature value")]
    LineNonFinite { line: usize },
    #[error("features line {line}: record source does not match declared cohort source")]
    LineSourceMismatch { line: usize },
    #[error("features line {line}: day must be a positive integer")]
    LineInvalidDay { line: usize },
    #[error("no records")]
    NoRecords,
    #[error("patient {patient}: vector length {got} does not match source dim {expected}")]
    DimensionMismatch {
        patient: String,
        expected: usize,
        got: usize,
    },
    #[error("patient {patient}: non-finite feature value")]
    NonFiniteFeature { patient: String },
    #[error("patient {patient}: day must be a positive integer")]
    InvalidDay { patient: String },
    #[error("labels row {row}: malformed: {err}")]
    MalformedLabel { row: usize, err: String },
    #[error("labels row {row}: value '{value}' not in {{0,1,true,false}}")]
    InvalidLabelValue { row: usize, value: String },
    #[error("duplicate label for patient {patient}")]
    DuplicateLabel { patient: String },
    #[error("label missing for patient {patient}")]
    MissingLabel { patient: String },
    #[error("label present for patient {patient} but no feature records")]
    LabelWithoutRecords { patient: String },
    #[error("cannot collapse clips with mixed identity or source")]
    MixedCollapse,
    #[error("collapse requires at least one record")]
    EmptyCollapse,
}

/// Collapses several clips of one (patient, view, day) into a single record
/// whose features are the element-wise arithmetic mean.
///
/// Permutation-invariant over the input records.
pub fn collapse_clips(records: &[ClipRecord]) -> Result<ClipRecord, CohortError> {
    let first = records.first().ok_or(CohortError::EmptyCollapse)?;
    if records.iter().any(|r| {
        r.patient_id != first.patient_id
            || r.view != first.view
            || r.day != first.day
            || r.source != first.source
            || r.features.len() != first.features.len()
    }) {
        return Err(CohortError::MixedCollapse);
    }
    let n = records.len() as f64;
    let mut features = vec![0.0; first.features.len()];
    for r in records {
        for (acc, v) in features.iter_mut().zip(&r.features) {
            *acc += v;
        }
    }
    for v in &mut features {
        *v /= n;
    }
    Ok(ClipRecord {
        patient_id: first.patient_id.clone(),
        view: first.view,
        day: first.day,
        source: first.source,
        features,
    })
}

impl Cohort {
    /// Builds a cohort from in-memory records and outcomes, applying the
    /// same validation and duplicate collapsing as file ingestion.
    pub fn from_parts(
        records: Vec<ClipRecord>,
        outcomes: Vec<PatientOutcome>,
        source: FeatureSource,
    ) -> Result<Cohort, CohortError> {
        if records.is_empty() {
            return Err(CohortError::NoRecords);
        }
        for r in &records {
            if r.source != source {
                return Err(CohortError::MixedCollapse);
            }
            r.validate()?;
        }
        let mut label_map: BTreeMap<String, bool> = BTreeMap::new();
        for o in &outcomes {
            if label_map.insert(o.patient_id.clone(), o.readmitted_30d).is_some() {
                return Err(CohortError::DuplicateLabel {
                    patient: o.patient_id.clone(),
                });
            }
        }

        // Group by (patient, view, day) and collapse duplicates.
        let mut groups: BTreeMap<(String, ViewId, u32), Vec<ClipRecord>> = BTreeMap::new();
        for r in records {
            groups
                .entry((r.patient_id.clone(), r.view, r.day))
                .or_default()
                .push(r);
        }
        let mut collapsed = Vec::with_capacity(groups.len());
        for (_, group) in groups {
            collapsed.push(collapse_clips(&group)?);
        }

        let record_patients: BTreeSet<&str> =
            collapsed.iter().map(|r| r.patient_id.as_str()).collect();
        for p in &record_patients {
            if !label_map.contains_key(*p) {
                return Err(CohortError::MissingLabel {
                    patient: (*p).to_string(),
                });
            }
        }
        for p in label_map.keys() {
            if !record_patients.contains(p.as_str()) {
                return Err(CohortError::LabelWithoutRecords { patient: p.clone() });
            }
        }

        let outcomes = label_map
            .into_iter()
            .map(|(patient_id, readmitted_30d)| PatientOutcome {
                patient_id,
                readmitted_30d,
            })
            .collect();
        Ok(Cohort {
            records: collapsed,
            outcomes,
            source,
        })
    }

    /// Records in deterministic (patient, view, day) order.
    pub fn records(&self) -> &[ClipRecord] {
        &self.records
    }

    /// Outcomes in patient-id order.
    pub fn outcomes(&self) -> &[PatientOutcome] {
        &self.outcomes
    }

    pub fn source(&self) -> FeatureSource {
        self.source
    }

    pub fn label_of(&self, patient_id: &str) -> Option<bool> {
        self.outcomes
            .binary_search_by(|o| o.patient_id.as_str().cmp(patient_id))
            .ok()
            .map(|i| self.outcomes[i].readmitted_30d)
    }

    pub fn patient_ids(&self) -> Vec<String> {
        self.outcomes.iter().map(|o| o.patient_id.clone()).collect()
    }

    pub fn positive_count(&self) -> usize {
        self.outcomes.iter().filter(|o| o.readmitted_30d).count()
    }

    pub fn negative_count(&self) -> usize {
        self.outcomes.len() - self.positive_count()
    }

    /// The record for (patient, view, day), if present.
    pub fn record_for(&self, patient_id: &str, view: ViewId, day: u32) -> Option<&ClipRecord> {
        self.records
            .binary_search_by(|r| {
                (r.patient_id.as_str(), r.view, r.day).cmp(&(patient_id, view, day))
            })
            .ok()
            .map(|i| &self.records[i])
    }

    /// Days with a record for (patient, view), ascending.
    pub fn days_for(&self, patient_id: &str, view: ViewId) -> Vec<u32> {
        self.records
            .iter()
            .filter(|r| r.patient_id == patient_id && r.view == view)
            .map(|r| r.day)
            .collect()
    }

    /// Writes the cohort back out in the ingestion formats.
    pub fn write_files(
        &self,
        features_path: &Path,
        labels_path: &Path,
    ) -> Result<(), CohortError> {
        let io_err = |path: &Path, e: std::io::Error| CohortError::Io {
            path: path.display().to_string(),
            err: e.to_string(),
        };
        let mut f = File::create(features_path).map_err(|e| io_err(features_path, e))?;
        for r in &self.records {
            let line = serde_json::json!({
                "patient_id": r.patient_id,
                "view": r.view.as_str(),
                "day": r.day,
                "source": r.source.token(),
                "features": r.features,
            });
            writeln!(f, "{line}").map_err(|e| io_err(features_path, e))?;
        }
        let mut f = File::create(labels_path).map_err(|e| io_err(labels_path, e))?;
        writeln!(f, "patient_id,readmitted").map_err(|e| io_err(labels_path, e))?;
        for o in &self.outcomes {
            writeln!(f, "{},{}", o.patient_id, u8::from(o.readmitted_30d))
                .map_err(|e| io_err(labels_path, e))?;
        }
        Ok(())
    }
}

/// Raw wire schema of one JSONL features line.
#[derive(Deserialize)]
struct ClipLine {
    patient_id: String,
    view: String,
    day: i64,
    source: String,
    features: Vec<f64>,
}

/// Loads and validates a cohort from a JSONL features file and a CSV
/// labels file. Duplicate (patient, view, day) clips are averaged.
pub fn load_cohort(
    features_path: &Path,
    labels_path: &Path,
    source: FeatureSource,
) -> Result<Cohort, CohortError> {
    let file = File::open(features_path).map_err(|e| CohortError::Io {
        path: features_path.display().to_string(),
        err: e.to_string(),
    })?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CohortError::Io {
            path: features_path.display().to_string(),
            err: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: ClipLine =
            serde_json::from_str(&line).map_err(|e| CohortError::MalformedLine {
                line: line_no,
                err: e.to_string(),
            })?;
        let view = ViewId::parse(&raw.view).ok_or_else(|| CohortError::UnknownView {
            line: line_no,
            view: raw.view.clone(),
        })?;
        let rec_source =
            FeatureSource::parse(&raw.source).ok_or_else(|| CohortError::UnknownSource {
                line: line_no,
                token: raw.source.clone(),
            })?;
        if rec_source != source {
            return Err(CohortError::LineSourceMismatch { line: line_no });
        }
        if raw.day < 1 {
            return Err(CohortError::LineInvalidDay { line: line_no });
        }
        if raw.features.len() != source.dim() {
            return Err(CohortError::LineDimension {
                line: line_no,
                expected: source.dim(),
                got: raw.features.len(),
            });
        }
        if raw.features.iter().any(|v| !v.is_finite()) {
            return Err(CohortError::LineNonFinite { line: line_no });
        }
        records.push(ClipRecord {
            patient_id: raw.patient_id,
            view,
            day: raw.day as u32,
            source,
            features: raw.features,
        });
    }
    if records.is_empty() {
        return Err(CohortError::NoRecords);
    }

    let outcomes = load_labels(labels_path)?;
    Cohort::from_parts(records, outcomes, source)
}

fn load_labels(labels_path: &Path) -> Result<Vec<PatientOutcome>, CohortError> {
    let file = File::open(labels_path).map_err(|e| CohortError::Io {
        path: labels_path.display().to_string(),
        err: e.to_string(),
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut outcomes = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let row_no = idx + 2; // 1-based, after the header
        let row = row.map_err(|e| CohortError::MalformedLabel {
            row: row_no,
            err: e.to_string(),
        })?;
        if row.len() != 2 {
            return Err(CohortError::MalformedLabel {
                row: row_no,
                err: format!("expected 2 fields, got {}", row.len()),
            });
        }
        let value = &row[1];
        let readmitted = match value {
            "0" | "false" => false,
            "1" | "true" => true,
            other => {
                return Err(CohortError::InvalidLabelValue {
                    row: row_no,
                    value: other.to_string(),
                })
            }
        };
        outcomes.push(PatientOutcome {
            patient_id: row[0].to_string(),
            readmitted_30d: readmitted,
        });
    }
    Ok(outcomes)
}

/// Cohort composition counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub patients: usize,
    pub positives: usize,
    pub negatives: usize,
    /// day -> number of clip records on that day
    pub per_day: BTreeMap<u32, usize>,
    /// view -> number of clip records for that view
    pub per_view: BTreeMap<ViewId, usize>,
    pub total_records: usize,
}

impl fmt::Display for CohortSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "patients={} positive={} negative={}",
            self.patients, self.positives, self.negatives
        )?;
        for (day, n) in &self.per_day {
            writeln!(f, "day {day}: {n} scans")?;
        }
        for (view, n) in &self.per_view {
            writeln!(f, "view {view}: {n} scans")?;
        }
        write!(f, "records={}", self.total_records)
    }
}

/// Counts patients, outcomes, and per-day / per-view scans by enumeration.
pub fn summarize(cohort: &Cohort) -> CohortSummary {
    let mut per_day = BTreeMap::new();
    let mut per_view = BTreeMap::new();
    for r in cohort.records() {
        *per_day.entry(r.day).or_insert(0) += 1;
        *per_view.entry(r.view).or_insert(0) += 1;
    }
    CohortSummary {
        patients: cohort.outcomes().len(),
        positives: cohort.positive_count(),
        negatives: cohort.negative_count(),
        per_day,
        per_view,
        total_records: cohort.records().len(),
    }
}

/// Per-patient gaps a pipeline run may care about: views or days that are
/// absent at ingestion. Completeness is enforced downstream, not here.
pub fn missing_view_report(cohort: &Cohort) -> Vec<String> {
    let mut notes = Vec::new();
    for outcome in cohort.outcomes() {
        let present: BTreeSet<ViewId> = cohort
            .records()
            .iter()
            .filter(|r| r.patient_id == outcome.patient_id)
            .map(|r| r.view)
            .collect();
        let missing: Vec<&str> = ViewId::ALL
            .iter()
            .filter(|v| !present.contains(v))
            .map(|v| v.as_str())
            .collect();
        if !missing.is_empty() {
            notes.push(format!(
                "patient {}: missing views {}",
                outcome.patient_id,
                missing.join(",")
            ));
        }
    }
    notes
}

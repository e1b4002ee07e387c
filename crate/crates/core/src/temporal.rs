//! Day-pair construction and temporal feature representations.
//!
//! For each patient and view, sequential day-pairs (day_a < day_b,
//! consecutive in the patient's available-day list) become labeled
//! samples. The pair is represented either as the element-wise difference
//! (later minus earlier, highlighting change) or as the chronological
//! concatenation of both vectors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{Cohort, ViewId};

/// Which day-pairs become samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DayPairPolicy {
    /// Exactly days 1 and 2; patients lacking either are skipped.
    FirstPair,
    /// Every consecutive pair in the patient's available-day list, so days
    /// {1,3} yield (1,3) when day 2 is absent.
    AllSequentialPairs,
}

/// How a day-pair turns into one feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemporalMode {
    /// Later day minus earlier day, element-wise; output dim = d.
    Difference,
    /// [earlier ‖ later]; output dim = 2d.
    Concatenate,
}

/// Identity of the view(s) a sample was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViewKey {
    Single(ViewId),
    AllViews,
}

impl ViewKey {
    pub fn as_str(self) -> &'static str {
        match self {
            ViewKey::Single(v) => v.as_str(),
            ViewKey::AllViews => "ALL",
        }
    }
}

/// One labeled training/evaluation unit: a (patient, view-set, day-pair)
/// with its temporal feature vector and the patient's readmission label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayPairSample {
    pub patient_id: String,
    pub view: ViewKey,
    pub day_a: u32,
    pub day_b: u32,
    pub vector: Vec<f64>,
    pub label: bool,
}

/// A day-pair before temporal representation: both raw vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDayPair {
    pub patient_id: String,
    pub view: ViewId,
    pub day_a: u32,
    pub day_b: u32,
    pub vec_a: Vec<f64>,
    pub vec_b: Vec<f64>,
    pub label: bool,
}

/// Why a patient produced no pair for a view (a warning, not an error).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSkip {
    pub patient_id: String,
    pub view: ViewId,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum TemporalError {
    #[error("dimension mismatch: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },
}

/// Enumerates day-pairs for one view across the cohort.
///
/// Returns the pairs plus a skip report for patients that lack the view or
/// the required days. Pair order is deterministic (patient id, day_a).
pub fn build_day_pairs(
    cohort: &Cohort,
    view: ViewId,
    policy: DayPairPolicy,
) -> (Vec<RawDayPair>, Vec<PairSkip>) {
    let mut pairs = Vec::new();
    let mut skips = Vec::new();
    for outcome in cohort.outcomes() {
        let patient = outcome.patient_id.as_str();
        let days = cohort.days_for(patient, view);
        if days.is_empty() {
            skips.push(PairSkip {
                patient_id: patient.to_string(),
                view,
                reason: "view absent".to_string(),
            });
            continue;
        }
        let selected: Vec<(u32, u32)> = match policy {
            DayPairPolicy::FirstPair => {
                if days.contains(&1) && days.contains(&2) {
                    vec![(1, 2)]
                } else {
                    skips.push(PairSkip {
                        patient_id: patient.to_string(),
                        view,
                        reason: format!("days 1 and 2 required, have {days:?}"),
                    });
                    continue;
                }
            }
            DayPairPolicy::AllSequentialPairs => {
                if days.len() < 2 {
                    skips.push(PairSkip {
                        patient_id: patient.to_string(),
                        view,
                        reason: format!("fewer than two days, have {days:?}"),
                    });
                    continue;
                }
                days.windows(2).map(|w| (w[0], w[1])).collect()
            }
        };
        for (day_a, day_b) in selected {
            let rec_a = cohort.record_for(patient, view, day_a).expect("day listed");
            let rec_b = cohort.record_for(patient, view, day_b).expect("day listed");
            pairs.push(RawDayPair {
                patient_id: patient.to_string(),
                view,
                day_a,
                day_b,
                vec_a: rec_a.features.clone(),
                vec_b: rec_b.features.clone(),
                label: outcome.readmitted_30d,
            });
        }
    }
    (pairs, skips)
}

/// Temporal representation of a day-pair: difference (vec_b − vec_a) or
/// chronological concatenation [vec_a ‖ vec_b].
pub fn represent(
    vec_a: &[f64],
    vec_b: &[f64],
    mode: TemporalMode,
) -> Result<Vec<f64>, TemporalError> {
    if vec_a.len() != vec_b.len() {
        return Err(TemporalError::DimensionMismatch {
            a: vec_a.len(),
            b: vec_b.len(),
        });
    }
    Ok(match mode {
        TemporalMode::Difference => vec_a.iter().zip(vec_b).map(|(a, b)| b - a).collect(),
        TemporalMode::Concatenate => {
            let mut out = Vec::with_capacity(vec_a.len() * 2);
            out.extend_from_slice(vec_a);
            out.extend_from_slice(vec_b);
            out
        }
    })
}

/// Applies the temporal representation to a raw pair, producing a sample.
pub fn to_sample(pair: &RawDayPair, mode: TemporalMode) -> Result<DayPairSample, TemporalError> {
    Ok(DayPairSample {
        patient_id: pair.patient_id.clone(),
        view: ViewKey::Single(pair.view),
        day_a: pair.day_a,
        day_b: pair.day_b,
        vector: represent(&pair.vec_a, &pair.vec_b, mode)?,
        label: pair.label,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{ClipRecord, FeatureSource, PatientOutcome};
    use proptest::prelude::*;

    fn cohort_with_days(patient_days: &[(&str, &[u32])]) -> Cohort {
        let mut records = Vec::new();
        let mut outcomes = Vec::new();
        for (i, (p, days)) in patient_days.iter().enumerate() {
            outcomes.push(PatientOutcome {
                patient_id: p.to_string(),
                readmitted_30d: i % 2 == 0,
            });
            for &d in *days {
                records.push(ClipRecord {
                    patient_id: p.to_string(),
                    view: ViewId::L3,
                    day: d,
                    source: FeatureSource::Biomarker,
                    features: vec![d as f64; 38],
                });
            }
        }
        Cohort::from_parts(records, outcomes, FeatureSource::Biomarker).unwrap()
    }

    #[test]
    fn all_sequential_pairs_enumerates_consecutive_days() {
        let cohort = cohort_with_days(&[("P1", &[1, 2, 3, 4])]);
        let (pairs, skips) = build_day_pairs(&cohort, ViewId::L3, DayPairPolicy::AllSequentialPairs);
        let keys: Vec<(u32, u32)> = pairs.iter().map(|p| (p.day_a, p.day_b)).collect();
        assert_eq!(keys, vec![(1, 2), (2, 3), (3, 4)]);
        assert!(skips.is_empty());
    }

    #[test]
    fn gap_days_pair_up_under_all_sequential() {
        let cohort = cohort_with_days(&[("P1", &[1, 3])]);
        let (pairs, _) = build_day_pairs(&cohort, ViewId::L3, DayPairPolicy::AllSequentialPairs);
        assert_eq!(pairs.len(), 1);
        assert_eq!((pairs[0].day_a, pairs[0].day_b), (1, 3));
    }

    #[test]
    fn first_pair_requires_days_one_and_two() {
        let cohort = cohort_with_days(&[("P1", &[1, 3]), ("P2", &[1, 2])]);
        let (pairs, skips) = build_day_pairs(&cohort, ViewId::L3, DayPairPolicy::FirstPair);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].patient_id, "P2");
        assert_eq!(skips.len(), 1);
        assert_eq!(skips[0].patient_id, "P1");
    }

    #[test]
    fn missing_view_is_a_skip_not_an_error() {
        let cohort = cohort_with_days(&[("P1", &[1, 2])]);
        let (pairs, skips) = build_day_pairs(&cohort, ViewId::R2, DayPairPolicy::FirstPair);
        assert!(pairs.is_empty());
        assert_eq!(skips[0].reason, "view absent");
    }

    #[test]
    fn difference_of_identical_vectors_is_zero() {
        let v = vec![1.5, -2.25, 0.0, 7.0];
        let out = represent(&v, &v, TemporalMode::Difference).unwrap();
        assert!(out.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn difference_is_later_minus_earlier() {
        let out = represent(&[1.0, 2.0], &[4.0, 6.0], TemporalMode::Difference).unwrap();
        assert_eq!(out, vec![3.0, 4.0]);
    }

    #[test]
    fn concatenate_is_chronological() {
        let out = represent(&[1.0], &[2.0], TemporalMode::Concatenate).unwrap();
        assert_eq!(out, vec![1.0, 2.0]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert!(represent(&[1.0], &[1.0, 2.0], TemporalMode::Difference).is_err());
    }

    proptest! {
        #[test]
        fn difference_antisymmetry(
            pairs in proptest::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 1..20),
        ) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let ab = represent(&a, &b, TemporalMode::Difference).unwrap();
            let ba = represent(&b, &a, TemporalMode::Difference).unwrap();
            for (x, y) in ab.iter().zip(&ba) {
                prop_assert_eq!(*x, -*y);
            }
        }

        #[test]
        fn concatenate_round_trips_inputs(
            pairs in proptest::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 1..20),
        ) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let cat = represent(&a, &b, TemporalMode::Concatenate).unwrap();
            prop_assert_eq!(&cat[..a.len()], &a[..]);
            prop_assert_eq!(&cat[a.len()..], &b[..]);
        }

        #[test]
        fn pair_count_is_days_minus_one(n_days in 2u32..6) {
            let days: Vec<u32> = (1..=n_days).collect();
            let cohort = cohort_with_days(&[("P1", &days)]);
            let (pairs, _) =
                build_day_pairs(&cohort, ViewId::L3, DayPairPolicy::AllSequentialPairs);
            prop_assert_eq!(pairs.len(), (n_days - 1) as usize);
        }
    }
}

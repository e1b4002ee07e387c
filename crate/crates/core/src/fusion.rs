//! Multi-view combination at the feature level (average, max pooling, or
//! fixed-order concatenation) or at the decision level (max-voting or
//! probability averaging), plus the cross-lung training augmentation that
//! pools mirrored left/right views.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::ViewId;
use crate::temporal::{DayPairSample, ViewKey};

/// Feature-level fusion over per-view vectors of equal dimension d.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureFusion {
    /// Element-wise mean; output dim d.
    Average,
    /// Element-wise maximum; output dim d.
    Max,
    /// Fixed-order concatenation L1,L2,L3,R1,R2,R3; output dim 6d.
    Concatenate,
}

/// Decision-level fusion over per-view predicted probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionFusion {
    /// Majority vote of per-view thresholded labels.
    MaxVotes,
    /// Mean predicted probability.
    AverageProba,
}

/// What to do when a view is missing from a multi-view sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MissingViewPolicy {
    /// Skip the sample (with a warning). The default: zero-imputation in
    /// concatenation mode biases the classifier.
    #[default]
    Skip,
    /// Missing views contribute zero vectors under Concatenate and are
    /// excluded from the mean/max under Average/Max.
    ZeroImpute,
}

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("no views present")]
    NoViews,
    #[error("per-view vectors must share one dimension")]
    DimensionMismatch,
    #[error("probability {0} outside [0,1]")]
    InvalidProbability(f64),
    #[error("cross-lung pooling applies to single-view samples only")]
    CrossLungOnFused,
}

/// Outcome of feature fusion: a vector, or a skip signal naming the views
/// that were missing.
#[derive(Debug, Clone, PartialEq)]
pub enum Fused {
    Vector(Vec<f64>),
    Skipped { missing: Vec<ViewId> },
}

/// Combines per-view vectors into one multi-view vector.
pub fn fuse_features(
    per_view: &BTreeMap<ViewId, Vec<f64>>,
    strategy: FeatureFusion,
    policy: MissingViewPolicy,
) -> Result<Fused, FusionError> {
    if per_view.is_empty() {
        return Err(FusionError::NoViews);
    }
    let dim = per_view.values().next().expect("non-empty").len();
    if per_view.values().any(|v| v.len() != dim) {
        return Err(FusionError::DimensionMismatch);
    }
    let missing: Vec<ViewId> = ViewId::ALL
        .iter()
        .copied()
        .filter(|v| !per_view.contains_key(v))
        .collect();
    if !missing.is_empty() && policy == MissingViewPolicy::Skip {
        return Ok(Fused::Skipped { missing });
    }

    let out = match strategy {
        FeatureFusion::Average => {
            let n = per_view.len() as f64;
            let mut acc = vec![0.0; dim];
            for v in per_view.values() {
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += x;
                }
            }
            for a in &mut acc {
                *a /= n;
            }
            acc
        }
        FeatureFusion::Max => {
            let mut acc = vec![f64::NEG_INFINITY; dim];
            for v in per_view.values() {
                for (a, x) in acc.iter_mut().zip(v) {
                    if *x > *a {
                        *a = *x;
                    }
                }
            }
            acc
        }
        FeatureFusion::Concatenate => {
            let mut acc = Vec::with_capacity(6 * dim);
            for view in ViewId::ALL {
                match per_view.get(&view) {
                    Some(v) => acc.extend_from_slice(v),
                    None => acc.extend(std::iter::repeat_n(0.0, dim)),
                }
            }
            acc
        }
    };
    Ok(Fused::Vector(out))
}

/// Combines per-view probabilities into one (label, fused probability).
///
/// MaxVotes ties (possible with six views) resolve by comparing the mean
/// probability to the threshold; a mean exactly at the threshold yields
/// label 0, the majority class.
pub fn fuse_decisions(
    per_view_proba: &BTreeMap<ViewId, f64>,
    strategy: DecisionFusion,
    threshold: f64,
) -> Result<(bool, f64), FusionError> {
    if per_view_proba.is_empty() {
        return Err(FusionError::NoViews);
    }
    for &p in per_view_proba.values() {
        if !(0.0..=1.0).contains(&p) {
            return Err(FusionError::InvalidProbability(p));
        }
    }
    let n = per_view_proba.len() as f64;
    let mean: f64 = per_view_proba.values().sum::<f64>() / n;
    Ok(match strategy {
        DecisionFusion::AverageProba => (mean >= threshold, mean),
        DecisionFusion::MaxVotes => {
            let votes = per_view_proba
                .values()
                .filter(|&&p| p >= threshold)
                .count();
            let against = per_view_proba.len() - votes;
            let label = match votes.cmp(&against) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                // Summation noise must not break the documented tie rule:
                // a mean within 1e-12 of the threshold counts as exactly at
                // it and resolves to the majority (negative) class.
                std::cmp::Ordering::Equal => mean > threshold + 1e-12,
            };
            (label, votes as f64 / n)
        }
    })
}

/// Training-time cross-lung augmentation: the training set for a view-v
/// model becomes the union of view-v samples and mirror(v) samples
/// relabeled to view v. Evaluation sets are never expanded.
pub fn cross_lung_expand(
    train_samples: &[DayPairSample],
    target_view: ViewId,
    enabled: bool,
) -> Result<Vec<DayPairSample>, FusionError> {
    if train_samples
        .iter()
        .any(|s| matches!(s.view, ViewKey::AllViews))
    {
        return Err(FusionError::CrossLungOnFused);
    }
    if !enabled {
        return Ok(train_samples
            .iter()
            .filter(|s| s.view == ViewKey::Single(target_view))
            .cloned()
            .collect());
    }
    let mirror = target_view.mirror();
    let mut out = Vec::new();
    for s in train_samples {
        match s.view {
            ViewKey::Single(v) if v == target_view => out.push(s.clone()),
            ViewKey::Single(v) if v == mirror => {
                let mut relabeled = s.clone();
                relabeled.view = ViewKey::Single(target_view);
                out.push(relabeled);
            }
            _ => {}
        }
    }
    Ok(out)
}

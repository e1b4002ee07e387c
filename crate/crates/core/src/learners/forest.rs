//! Random forest: bagged CART trees with per-split feature subsampling.
//!
//! Each tree draws an n-of-n bootstrap sample and examines
//! mtry = floor(sqrt(d)) candidate features per split. Tree seeds derive
//! from the spec seed and the tree index, so fits are reproducible and
//! independent of evaluation order.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, TreeModel};
use crate::rng::rng_from;

const FOREST_STREAM: u64 = 0x464f_5245;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    pub mtry: usize,
    pub n_features: usize,
}

impl ForestModel {
    /// Mean of member-tree leaf fractions.
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_proba(row)).sum();
        sum / self.trees.len() as f64
    }
}

pub(crate) fn mtry_for(dim: usize) -> usize {
    ((dim as f64).sqrt().floor() as usize).max(1)
}

/// Exactly n draws with replacement.
pub(crate) fn bootstrap_indices<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// mtry distinct feature indices, returned ascending so split tie-breaks
/// stay deterministic.
pub(crate) fn sample_candidates<R: Rng>(rng: &mut R, dim: usize, mtry: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..dim).collect();
    for i in 0..mtry {
        let j = rng.random_range(i..dim);
        pool.swap(i, j);
    }
    let mut picked = pool[..mtry].to_vec();
    picked.sort_unstable();
    picked
}

pub(crate) fn fit_forest(
    x: &[Vec<f64>],
    y: &[bool],
    n_trees: usize,
    min_samples_leaf: usize,
    seed: u64,
) -> ForestModel {
    let n = x.len();
    let dim = x[0].len();
    let mtry = mtry_for(dim);
    let mut trees = Vec::with_capacity(n_trees);
    for tree_idx in 0..n_trees {
        let mut rng = rng_from(seed, &[FOREST_STREAM, tree_idx as u64]);
        let indices = bootstrap_indices(&mut rng, n);
        let mut pick = || sample_candidates(&mut rng, dim, mtry);
        trees.push(grow_tree(x, y, indices, usize::MAX, min_samples_leaf, &mut pick));
    }
    ForestModel { trees, mtry, n_features: dim }
}

//! CART binary classification tree with Gini impurity.
//!
//! Thresholds are searched exhaustively at midpoints of consecutive sorted
//! unique values. Ties break toward the lowest feature index, then the
//! lowest threshold, making every fit deterministic.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        pos: usize,
        total: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Samples that reached this node during training.
        n_node: usize,
        /// Gini decrease achieved by the split (parent minus weighted children).
        impurity_decrease: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<TreeNode>,
}

impl TreeModel {
    /// Positive-class fraction of the leaf the row lands in.
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf { pos, total } => return *pos as f64 / *total as f64,
                TreeNode::Split { feature, threshold, left, right, .. } => {
                    idx = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn n_internal_nodes(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Split { .. }))
            .count()
    }
}

fn gini(pos: usize, total: usize) -> f64 {
    let p = pos as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    weighted_impurity: f64,
}

/// Search all candidate features for the best Gini split of `indices`.
/// `candidates` must be ascending; earlier features win ties because only
/// strict improvements replace the incumbent.
fn best_split(
    x: &[Vec<f64>],
    y: &[bool],
    indices: &[usize],
    candidates: &[usize],
    min_samples_leaf: usize,
) -> Option<BestSplit> {
    let n = indices.len();
    let total_pos = indices.iter().filter(|&&i| y[i]).count();
    let parent = gini(total_pos, n);
    let mut best: Option<BestSplit> = None;

    let mut column: Vec<(f64, bool)> = Vec::with_capacity(n);
    for &feature in candidates {
        column.clear();
        column.extend(indices.iter().map(|&i| (x[i][feature], y[i])));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left_n = 0usize;
        let mut left_pos = 0usize;
        for i in 0..n - 1 {
            left_n += 1;
            if column[i].1 {
                left_pos += 1;
            }
            let (v, next) = (column[i].0, column[i + 1].0);
            if v == next {
                continue;
            }
            let right_n = n - left_n;
            if left_n < min_samples_leaf || right_n < min_samples_leaf {
                continue;
            }
            let mut threshold = (v + next) / 2.0;
            // Adjacent floats can round the midpoint onto `next`; pin it to
            // `v` so `x <= threshold` reproduces the counted partition.
            if threshold >= next {
                threshold = v;
            }
            let right_pos = total_pos - left_pos;
            let weighted = (left_n as f64 * gini(left_pos, left_n)
                + right_n as f64 * gini(right_pos, right_n))
                / n as f64;
            if weighted < parent && best.as_ref().is_none_or(|b| weighted < b.weighted_impurity) {
                best = Some(BestSplit { feature, threshold, weighted_impurity: weighted });
            }
        }
    }
    best
}

/// Recursive tree growth shared by the plain tree and forest members.
/// `pick_candidates` chooses the features examined at each split (all of
/// them for a plain CART tree, a random subset for forest trees).
pub(crate) fn grow_tree(
    x: &[Vec<f64>],
    y: &[bool],
    indices: Vec<usize>,
    max_depth: usize,
    min_samples_leaf: usize,
    pick_candidates: &mut dyn FnMut() -> Vec<usize>,
) -> TreeModel {
    let mut nodes = Vec::new();
    grow_node(
        x,
        y,
        indices,
        0,
        max_depth,
        min_samples_leaf,
        pick_candidates,
        &mut nodes,
    );
    TreeModel { nodes }
}

#[allow(clippy::too_many_arguments)]
fn grow_node(
    x: &[Vec<f64>],
    y: &[bool],
    indices: Vec<usize>,
    depth: usize,
    max_depth: usize,
    min_samples_leaf: usize,
    pick_candidates: &mut dyn FnMut() -> Vec<usize>,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let n = indices.len();
    let pos = indices.iter().filter(|&&i| y[i]).count();
    let make_leaf = |nodes: &mut Vec<TreeNode>| {
        nodes.push(TreeNode::Leaf { pos, total: n });
        nodes.len() - 1
    };
    if pos == 0 || pos == n || depth >= max_depth || n < 2 * min_samples_leaf {
        return make_leaf(nodes);
    }
    let candidates = pick_candidates();
    let Some(split) = best_split(x, y, &indices, &candidates, min_samples_leaf) else {
        return make_leaf(nodes);
    };

    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .iter()
        .partition(|&&i| x[i][split.feature] <= split.threshold);
    let decrease = gini(pos, n) - split.weighted_impurity;

    let node_slot = nodes.len();
    nodes.push(TreeNode::Leaf { pos, total: n }); // placeholder until children exist
    let left = grow_node(
        x,
        y,
        left_idx,
        depth + 1,
        max_depth,
        min_samples_leaf,
        pick_candidates,
        nodes,
    );
    let right = grow_node(
        x,
        y,
        right_idx,
        depth + 1,
        max_depth,
        min_samples_leaf,
        pick_candidates,
        nodes,
    );
    nodes[node_slot] = TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
        n_node: n,
        impurity_decrease: decrease,
    };
    node_slot
}

/// Fits a plain CART tree examining every feature at every split.
pub(crate) fn fit_tree(
    x: &[Vec<f64>],
    y: &[bool],
    max_depth: usize,
    min_samples_leaf: usize,
) -> TreeModel {
    let dim = x[0].len();
    let all: Vec<usize> = (0..dim).collect();
    let mut pick = || all.clone();
    grow_tree(x, y, (0..x.len()).collect(), max_depth, min_samples_leaf, &mut pick)
}

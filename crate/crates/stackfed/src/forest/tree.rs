//! CART decision tree: greedy best-split search on Gini impurity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tabular::EncodedMatrix;

use super::ForestParams;

/// One tree node. Internal nodes store the split and the impurity decrease
/// it achieved; leaves store class counts (bootstrap sample weights).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: u32,
        threshold: f64,
        decrease: f64,
        n_samples: u64,
        left: u32,
        right: u32,
    },
    Leaf {
        counts: [u64; 2],
    },
}

/// A fitted tree as a node arena; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub(crate) nodes: Vec<Node>,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Total sample weight at the root.
    pub fn root_samples(&self) -> u64 {
        match &self.nodes[0] {
            Node::Split { n_samples, .. } => *n_samples,
            Node::Leaf { counts } => counts[0] + counts[1],
        }
    }

    /// Class counts of the leaf the row lands in.
    pub fn leaf_counts(&self, row: &[f64]) -> [u64; 2] {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    idx = if row[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
                Node::Leaf { counts } => return *counts,
            }
        }
    }
}

#[inline]
fn gini(w0: u64, w1: u64) -> f64 {
    let total = (w0 + w1) as f64;
    let p0 = w0 as f64 / total;
    let p1 = w1 as f64 / total;
    1.0 - p0 * p0 - p1 * p1
}

struct BestSplit {
    feature: u32,
    threshold: f64,
    decrease: f64,
}

/// Best boundary for one feature over the node rows, or None when the
/// feature is constant or no boundary satisfies `min_samples_leaf`.
#[allow(clippy::too_many_arguments)]
fn scan_feature(
    scratch: &mut Vec<(f64, u8, u64)>,
    x: &EncodedMatrix,
    y: &[u8],
    weights: &[u64],
    rows: &[u32],
    feature: usize,
    node_counts: [u64; 2],
    min_samples_leaf: u64,
) -> Option<(f64, f64)> {
    scratch.clear();
    scratch.extend(
        rows.iter()
            .map(|&r| (x.value(r as usize, feature), y[r as usize], weights[r as usize])),
    );
    scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    let total = node_counts[0] + node_counts[1];
    let impurity = gini(node_counts[0], node_counts[1]);
    let total_f = total as f64;

    let mut left = [0u64; 2];
    let mut best: Option<(f64, f64)> = None; // (decrease, threshold)
    for i in 0..scratch.len() - 1 {
        let (value, class, weight) = scratch[i];
        left[class as usize] += weight;
        let next_value = scratch[i + 1].0;
        if next_value == value {
            continue;
        }
        let l = left[0] + left[1];
        let r = total - l;
        if l < min_samples_leaf || r < min_samples_leaf {
            continue;
        }
        let right = [node_counts[0] - left[0], node_counts[1] - left[1]];
        let decrease = impurity
            - (l as f64 / total_f) * gini(left[0], left[1])
            - (r as f64 / total_f) * gini(right[0], right[1]);
        // midpoint between consecutive distinct values; guard against the
        // midpoint rounding up to the right value
        let mut threshold = value + (next_value - value) / 2.0;
        if threshold >= next_value {
            threshold = value;
        }
        let better = match best {
            None => decrease > 0.0,
            Some((bd, bt)) => decrease > bd || (decrease == bd && threshold < bt),
        };
        if better {
            best = Some((decrease, threshold));
        }
    }
    best.map(|(d, t)| (t, d))
}

/// Fit a CART tree on the rows where `weights > 0`.
///
/// At each node `max_features_per_split` candidate features are drawn
/// without replacement from `rng`; the split maximizing the weighted Gini
/// impurity decrease wins, ties broken by lowest `(feature, threshold)`.
/// Nodes become leaves when pure, below `min_samples_split`, at
/// `max_depth`, or when no candidate split yields a positive decrease.
pub fn fit_tree(
    x: &EncodedMatrix,
    y: &[u8],
    weights: &[u64],
    params: &ForestParams,
    rng: &mut Rng,
) -> Result<Tree> {
    assert_eq!(x.n_rows(), y.len());
    assert_eq!(x.n_rows(), weights.len());
    let mut rows: Vec<u32> = (0..x.n_rows() as u32)
        .filter(|&r| weights[r as usize] > 0)
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let k = params.effective_max_features(x.n_cols());

    let mut nodes: Vec<Node> = Vec::new();
    let mut scratch: Vec<(f64, u8, u64)> = Vec::new();
    // explicit work stack; right child pushed first so the left subtree is
    // built first, matching recursive pre-order rng consumption
    struct Task {
        start: usize,
        end: usize,
        depth: usize,
        parent: Option<(usize, bool)>, // (node index, is_right_child)
    }
    let mut stack = vec![Task {
        start: 0,
        end: rows.len(),
        depth: 0,
        parent: None,
    }];

    while let Some(task) = stack.pop() {
        let slice = &rows[task.start..task.end];
        let mut counts = [0u64; 2];
        for &r in slice {
            counts[y[r as usize] as usize] += weights[r as usize];
        }
        let total = counts[0] + counts[1];

        let at_depth_limit = params.max_depth.is_some_and(|d| task.depth >= d);
        let splittable = counts[0] > 0
            && counts[1] > 0
            && total >= params.min_samples_split
            && !at_depth_limit
            && k > 0;

        let mut chosen: Option<BestSplit> = None;
        if splittable {
            for f in rng.sample_indices(x.n_cols(), k) {
                if let Some((threshold, decrease)) = scan_feature(
                    &mut scratch,
                    x,
                    y,
                    weights,
                    slice,
                    f,
                    counts,
                    params.min_samples_leaf,
                ) {
                    let better = match &chosen {
                        None => true,
                        Some(b) => {
                            decrease > b.decrease
                                || (decrease == b.decrease
                                    && (f as u32, threshold) < (b.feature, b.threshold))
                        }
                    };
                    if better {
                        chosen = Some(BestSplit {
                            feature: f as u32,
                            threshold,
                            decrease,
                        });
                    }
                }
            }
        }

        let node_idx = nodes.len();
        if let Some((p, is_right)) = task.parent {
            if let Node::Split { left, right, .. } = &mut nodes[p] {
                if is_right {
                    *right = node_idx as u32;
                } else {
                    *left = node_idx as u32;
                }
            }
        }

        match chosen {
            None => nodes.push(Node::Leaf { counts }),
            Some(best) => {
                // in-place partition: rows <= threshold go left
                let (mut i, mut j) = (task.start, task.end);
                while i < j {
                    if x.value(rows[i] as usize, best.feature as usize) <= best.threshold {
                        i += 1;
                    } else {
                        j -= 1;
                        rows.swap(i, j);
                    }
                }
                debug_assert!(i > task.start && i < task.end);
                nodes.push(Node::Split {
                    feature: best.feature,
                    threshold: best.threshold,
                    decrease: best.decrease,
                    n_samples: total,
                    left: 0,
                    right: 0,
                });
                stack.push(Task {
                    start: i,
                    end: task.end,
                    depth: task.depth + 1,
                    parent: Some((node_idx, true)),
                });
                stack.push(Task {
                    start: task.start,
                    end: i,
                    depth: task.depth + 1,
                    parent: Some((node_idx, false)),
                });
            }
        }
    }
    Ok(Tree { nodes })
}

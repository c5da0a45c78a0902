//! CART decision tree with Gini impurity, used as the forest's base learner.

use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Gini impurity `1 - sum p_i^2` of a binary class count pair.
pub fn gini_impurity(class_counts: [usize; 2]) -> Result<f64> {
    let n = class_counts[0] + class_counts[1];
    if n == 0 {
        return Err(Error::Numeric("gini impurity of an empty node".into()));
    }
    let n = n as f64;
    let p0 = class_counts[0] as f64 / n;
    let p1 = class_counts[1] as f64 / n;
    Ok(1.0 - p0 * p0 - p1 * p1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Features examined per node.
    pub max_features: usize,
    /// Nodes with fewer samples become leaves.
    pub min_split: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        /// Class proportions `[p(0), p(1)]` of the training samples in the leaf.
        proportions: [f64; 2],
        samples: usize,
    },
    Split {
        feature: usize,
        /// Samples with `x[feature] <= threshold` go left.
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_features: usize,
    pub root: Node,
}

impl DecisionTree {
    pub fn predict_row(&self, row: &[f64]) -> [f64; 2] {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { proportions, .. } => return *proportions,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(left).max(walk(right)),
            }
        }
        walk(&self.root)
    }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    /// Sum of `n_child * gini_child`; lower is better.
    score: f64,
}

fn counts(y: &[usize], idx: &[usize]) -> [usize; 2] {
    let ones = idx.iter().filter(|&&i| y[i] == 1).count();
    [idx.len() - ones, ones]
}

fn leaf(c: [usize; 2]) -> Node {
    let n = (c[0] + c[1]) as f64;
    Node::Leaf {
        proportions: [c[0] as f64 / n, c[1] as f64 / n],
        samples: c[0] + c[1],
    }
}

/// `n * gini` for counts `(a, b)` with `n = a + b > 0`.
fn weighted_gini(a: f64, b: f64) -> f64 {
    let n = a + b;
    n - (a * a + b * b) / n
}

fn best_split(x: &Matrix, y: &[usize], idx: &[usize], features: &[usize], scratch: &mut Vec<(f64, usize)>) -> Option<BestSplit> {
    let total = counts(y, idx);
    let mut best: Option<BestSplit> = None;
    for &f in features {
        scratch.clear();
        scratch.extend(idx.iter().map(|&i| (x.get(i, f), y[i])));
        scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = [0.0f64; 2];
        for p in 0..scratch.len() - 1 {
            left[scratch[p].1] += 1.0;
            let (v, next) = (scratch[p].0, scratch[p + 1].0);
            if v >= next {
                continue;
            }
            let right = [total[0] as f64 - left[0], total[1] as f64 - left[1]];
            let score = weighted_gini(left[0], left[1]) + weighted_gini(right[0], right[1]);
            if best.as_ref().is_none_or(|b| score < b.score) {
                let mut threshold = 0.5 * (v + next);
                if threshold >= next {
                    threshold = v;
                }
                best = Some(BestSplit {
                    feature: f,
                    threshold,
                    score,
                });
            }
        }
    }
    best
}

/// Grows a tree on the rows `indices` of `x` (repeats allowed, as produced
/// by bootstrap sampling).
///
/// Each node draws `max_features` distinct features from `rng` and picks the
/// split with the lowest weighted child Gini among midpoints of consecutive
/// distinct values. Ties go to the lower feature index, then the lower
/// threshold. A node becomes a leaf at `max_depth`, when pure, when it has
/// fewer than `min_split` samples, or when no feature varies.
pub fn train_decision_tree(
    x: &Matrix,
    y: &[usize],
    indices: &[usize],
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> Result<DecisionTree> {
    if indices.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if y.len() != x.rows() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} labels", x.rows()),
            found: format!("{} labels", y.len()),
        });
    }
    if y.iter().any(|&c| c > 1) {
        return Err(Error::Numeric("tree labels must be 0 or 1".into()));
    }
    let d = x.cols();
    let max_features = params.max_features.clamp(1, d.max(1));
    let mut scratch = Vec::with_capacity(indices.len());

    fn grow(
        x: &Matrix,
        y: &[usize],
        idx: Vec<usize>,
        depth: usize,
        params: &TreeParams,
        max_features: usize,
        rng: &mut ChaCha8Rng,
        scratch: &mut Vec<(f64, usize)>,
    ) -> Node {
        let c = counts(y, &idx);
        if depth >= params.max_depth || c[0] == 0 || c[1] == 0 || idx.len() < params.min_split.max(2) {
            return leaf(c);
        }
        let mut features = index::sample(rng, x.cols(), max_features).into_vec();
        features.sort_unstable();
        let Some(split) = best_split(x, y, &idx, &features, scratch) else {
            return leaf(c);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x.get(i, split.feature) <= split.threshold);
        drop(idx);
        let left = grow(x, y, l, depth + 1, params, max_features, rng, scratch);
        let right = grow(x, y, r, depth + 1, params, max_features, rng, scratch);
        Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    let root = grow(x, y, indices.to_vec(), 0, params, max_features, rng, &mut scratch);
    Ok(DecisionTree { n_features: d, root })
}

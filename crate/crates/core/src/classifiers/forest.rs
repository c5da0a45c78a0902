//! Bagged ensemble of CART trees with soft voting.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{train_decision_tree, DecisionTree, TreeParams};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub seed: u64,
    /// Features tried per node; `None` means `floor(sqrt(d))`.
    pub max_features: Option<usize>,
    pub min_split: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 10,
            seed: 42,
            max_features: None,
            min_split: 2,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::config("random_forest.n_trees", "must be positive"));
        }
        if self.max_features == Some(0) {
            return Err(Error::config("random_forest.max_features", "must be positive"));
        }
        Ok(())
    }

    pub fn features_for(&self, d: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (d as f64).sqrt().floor() as usize)
            .clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub params: ForestParams,
    pub n_features: usize,
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    /// Mean of the trees' leaf proportions.
    pub fn predict_proba_row(&self, row: &[f64]) -> [f64; 2] {
        let mut acc = [0.0; 2];
        for t in &self.trees {
            let p = t.predict_row(row);
            acc[0] += p[0];
            acc[1] += p[1];
        }
        let m = self.trees.len() as f64;
        let p1 = acc[1] / m;
        [1.0 - p1, p1]
    }

    pub fn predict_proba(&self, x: &Matrix) -> Vec<[f64; 2]> {
        x.row_iter().map(|r| self.predict_proba_row(r)).collect()
    }
}

pub(crate) fn check_binary(y: &[usize], n: usize) -> Result<()> {
    if y.len() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{n} labels"),
            found: format!("{} labels", y.len()),
        });
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if let Some(&bad) = y.iter().find(|&&c| c > 1) {
        return Err(Error::Numeric(format!("class label {bad} is not binary")));
    }
    let ones = y.iter().filter(|&&c| c == 1).count();
    if ones == 0 || ones == n {
        return Err(Error::DegenerateLabels);
    }
    Ok(())
}

/// Trains `n_trees` trees, tree `t` on a bootstrap sample of size `n` drawn
/// from `stream_rng(seed, t)`. The same stream then drives the tree's
/// per-node feature draws, so each tree depends only on `(X, y, params, t)`.
pub fn train_random_forest(x: &Matrix, y: &[usize], params: &ForestParams) -> Result<RandomForest> {
    params.validate()?;
    check_binary(y, x.rows())?;
    let n = x.rows();
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        max_features: params.features_for(x.cols()),
        min_split: params.min_split,
    };
    let trees = (0..params.n_trees)
        .map(|t| {
            let mut rng = stream_rng(params.seed, t as u64);
            let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            train_decision_tree(x, y, &sample, &tree_params, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RandomForest {
        params: params.clone(),
        n_features: x.cols(),
        trees,
    })
}

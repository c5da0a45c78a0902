//! k-nearest-neighbor voting and the cross-validated search over k.

use serde::{Deserialize, Serialize};

use super::forest::check_binary;
use crate::error::{Error, Result};
use crate::evaluation::{prepare_split, stratified_kfold, PreprocessMode};
use crate::matrix::{squared_distance, Matrix};
use crate::model::FeatureMatrix;
use crate::preprocessing::Preprocessor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weights {
    #[default]
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Euclidean,
}

/// Odd k from 1 to 29.
pub fn default_candidates() -> Vec<usize> {
    (1..=29).step_by(2).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    /// Fixed k; `None` selects k from `candidates` by cross-validation.
    pub k: Option<usize>,
    pub candidates: Vec<usize>,
    pub cv_folds: usize,
    pub weights: Weights,
    pub metric: Metric,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams {
            k: None,
            candidates: default_candidates(),
            cv_folds: 5,
            weights: Weights::Uniform,
            metric: Metric::Euclidean,
        }
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 || k % 2 == 0 {
        return Err(Error::config("knn.k", format!("k must be a positive odd integer, got {k}")));
    }
    Ok(())
}

impl KnnParams {
    pub fn validate(&self) -> Result<()> {
        if let Some(k) = self.k {
            check_k(k)?;
        }
        if self.candidates.is_empty() {
            return Err(Error::config("knn.candidates", "at least one candidate is required"));
        }
        for &k in &self.candidates {
            check_k(k)?;
        }
        if self.cv_folds < 2 {
            return Err(Error::config("knn.cv_folds", "must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub train_x: Matrix,
    pub train_y: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnPrediction {
    pub labels: Vec<usize>,
    /// Vote shares `[p(0), p(1)]`.
    pub proportions: Vec<[f64; 2]>,
}

/// The `k` training rows closest to `query`, nearest first; equal distances
/// are ordered by row index.
pub fn nearest_neighbors(train: &Matrix, query: &[f64], k: usize) -> Vec<usize> {
    let mut cand: Vec<(f64, usize)> = train
        .row_iter()
        .enumerate()
        .map(|(j, r)| (squared_distance(query, r), j))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, cmp);
        cand.truncate(k);
    }
    cand.sort_unstable_by(cmp);
    cand.into_iter().map(|(_, j)| j).collect()
}

fn vote(neighbors: &[usize], y: &[usize]) -> (usize, [f64; 2]) {
    let k = neighbors.len();
    let ones = neighbors.iter().filter(|&&j| y[j] == 1).count();
    let p1 = ones as f64 / k as f64;
    (usize::from(2 * ones > k), [1.0 - p1, p1])
}

pub fn knn_predict(train_x: &Matrix, train_y: &[usize], query: &Matrix, k: usize) -> Result<KnnPrediction> {
    check_k(k)?;
    if train_y.len() != train_x.rows() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} labels", train_x.rows()),
            found: format!("{} labels", train_y.len()),
        });
    }
    if k > train_x.rows() {
        return Err(Error::config(
            "knn.k",
            format!("k = {k} exceeds the {} training rows", train_x.rows()),
        ));
    }
    if query.cols() != train_x.cols() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} columns", train_x.cols()),
            found: format!("{} columns", query.cols()),
        });
    }
    let (labels, proportions) = query
        .row_iter()
        .map(|q| vote(&nearest_neighbors(train_x, q, k), train_y))
        .unzip();
    Ok(KnnPrediction { labels, proportions })
}

impl KnnModel {
    pub fn fit(x: &Matrix, y: &[usize], k: usize) -> Result<Self> {
        check_binary(y, x.rows())?;
        check_k(k)?;
        if k > x.rows() {
            return Err(Error::config("knn.k", format!("k = {k} exceeds the {} training rows", x.rows())));
        }
        Ok(KnnModel {
            k,
            train_x: x.clone(),
            train_y: y.to_vec(),
        })
    }

    pub fn predict(&self, x: &Matrix) -> Result<KnnPrediction> {
        knn_predict(&self.train_x, &self.train_y, x, self.k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub k: usize,
    /// `(k, mean cross-validated accuracy)` for each candidate, ascending k.
    pub scores: Vec<(usize, f64)>,
}

/// Picks the candidate with the highest mean stratified-CV accuracy; equal
/// means go to the smaller k. Neighbor lists are computed once per fold up
/// to the largest candidate, so every k sees the same folds and preprocessing.
pub fn select_k(
    x: &FeatureMatrix,
    y: &[usize],
    candidates: &[usize],
    folds: usize,
    seed: u64,
    mode: PreprocessMode,
) -> Result<KSelection> {
    check_binary(y, x.n_rows())?;
    if candidates.is_empty() {
        return Err(Error::config("knn.candidates", "at least one candidate is required"));
    }
    let mut ks = candidates.to_vec();
    ks.sort_unstable();
    ks.dedup();
    for &k in &ks {
        check_k(k)?;
    }
    let assignment = stratified_kfold(y, folds, seed)?;
    let k_max = *ks.last().expect("non-empty");
    let full = match mode {
        PreprocessMode::PaperFaithful => Some(Preprocessor::fit(x)?),
        PreprocessMode::LeakageSafe => None,
    };
    let mut acc_sum = vec![0.0; ks.len()];
    for fold in 0..folds {
        let (train, test) = assignment.split(fold);
        if k_max > train.len() {
            return Err(Error::config(
                "knn.candidates",
                format!("k = {k_max} exceeds the {} rows of a training fold", train.len()),
            ));
        }
        let (xtr, xte) = prepare_split(x, &train, &test, full.as_ref())?;
        let ytr: Vec<usize> = train.iter().map(|&i| y[i]).collect();
        let mut correct = vec![0usize; ks.len()];
        for (qi, &row) in test.iter().enumerate() {
            let nn = nearest_neighbors(&xtr, xte.row(qi), k_max);
            for (c, &k) in ks.iter().enumerate() {
                if vote(&nn[..k], &ytr).0 == y[row] {
                    correct[c] += 1;
                }
            }
        }
        for (s, c) in acc_sum.iter_mut().zip(&correct) {
            *s += *c as f64 / test.len() as f64;
        }
    }
    let scores: Vec<(usize, f64)> = ks.iter().zip(&acc_sum).map(|(&k, &s)| (k, s / folds as f64)).collect();
    let mut best = scores[0];
    for &s in &scores[1..] {
        if s.1 > best.1 {
            best = s;
        }
    }
    Ok(KSelection { k: best.0, scores })
}

//! Graph-based completion of the unlabeled samples: label propagation (hard
//! clamping, row-normalized diffusion) and label spreading (symmetric
//! normalization, soft clamping by `alpha`).

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};
use crate::model::{FeatureMatrix, SeverityLabel};

/// Prior given to rows with no information: no affinity, or no seed reached.
const UNIFORM: [f64; 2] = [0.5, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Rbf,
    Knn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AffinityConfig {
    pub kernel: KernelKind,
    /// RBF width; `None` uses `1 / (d * pooled variance)`.
    pub gamma: Option<f64>,
    /// Neighbor count of the knn kernel.
    pub k: usize,
    /// Spreading weight of the graph term, in (0, 1).
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AffinityConfig {
    fn default() -> Self {
        AffinityConfig {
            kernel: KernelKind::Rbf,
            gamma: None,
            k: 7,
            alpha: 0.2,
            tol: 1e-3,
            max_iter: 1000,
        }
    }
}

impl AffinityConfig {
    pub fn knn(k: usize) -> Self {
        AffinityConfig {
            kernel: KernelKind::Knn,
            k,
            ..AffinityConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("affinity", format!("alpha {} must lie in (0, 1)", self.alpha)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("affinity", "tol must be positive"));
        }
        if self.k == 0 {
            return Err(Error::config("affinity", "k must be at least 1"));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::config("affinity", format!("gamma {g} must be positive")));
            }
        }
        Ok(())
    }
}

/// Symmetric non-negative affinity matrix, stored as sorted adjacency rows.
/// The diagonal is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Affinity {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Affinity {
    /// Takes the off-diagonal non-zero entries of a square matrix.
    pub fn from_dense(w: &Matrix) -> Result<Self> {
        if w.rows() != w.cols() {
            return Err(Error::ShapeMismatch {
                expected: "square matrix".into(),
                found: format!("{}x{}", w.rows(), w.cols()),
            });
        }
        let n = w.rows();
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::new();
            for j in 0..n {
                let v = w.get(i, j);
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::Numeric(format!("affinity entry ({i},{j}) = {v}")));
                }
                if i != j && v > 0.0 {
                    if (v - w.get(j, i)).abs() > 0.0 {
                        return Err(Error::Numeric(format!("affinity not symmetric at ({i},{j})")));
                    }
                    row.push((j, v));
                }
            }
            rows.push(row);
        }
        Ok(Affinity { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map_or(0.0, |pos| self.rows[i][pos].1)
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|&(_, w)| w).sum()
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.len();
        let mut m = Matrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                m.set(i, j, w);
            }
        }
        m
    }
}

/// Default RBF width: `1 / (d * variance of all entries)`.
pub fn default_gamma(x: &Matrix) -> f64 {
    let var = x.pooled_variance();
    if var > 0.0 {
        1.0 / (x.cols() as f64 * var)
    } else {
        1.0
    }
}

/// Indices of the `k` nearest rows to row `i` (excluding `i`); distance ties
/// go to the lower index.
fn nearest(x: &Matrix, i: usize, k: usize) -> Vec<usize> {
    let q = x.row(i);
    let mut cand: Vec<(f64, usize)> = (0..x.rows())
        .filter(|&j| j != i)
        .map(|j| (squared_distance(q, x.row(j)), j))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k, cmp);
        cand.truncate(k);
    }
    cand.sort_unstable_by(cmp);
    cand.into_iter().map(|(_, j)| j).collect()
}

/// Builds the sample affinity graph from complete (imputed, standardized)
/// features.
///
/// * rbf: `w_ij = exp(-gamma * |x_i - x_j|^2)` for every pair.
/// * knn: `w_ij = 1` when `j` is among the `k` nearest neighbors of `i` or
///   the other way round.
pub fn build_affinity(x: &FeatureMatrix, cfg: &AffinityConfig) -> Result<Affinity> {
    build_affinity_dense(&x.to_dense()?, cfg)
}

pub fn build_affinity_dense(x: &Matrix, cfg: &AffinityConfig) -> Result<Affinity> {
    cfg.validate()?;
    let n = x.rows();
    if n < 2 {
        return Err(Error::Numeric(format!("affinity needs at least 2 samples, got {n}")));
    }
    let rows = match cfg.kernel {
        KernelKind::Rbf => {
            let gamma = cfg.gamma.unwrap_or_else(|| default_gamma(x));
            (0..n)
                .map(|i| {
                    (0..n)
                        .filter(|&j| j != i)
                        .map(|j| (j, (-gamma * squared_distance(x.row(i), x.row(j))).exp()))
                        .filter(|&(_, w)| w > 0.0)
                        .collect()
                })
                .collect()
        }
        KernelKind::Knn => {
            let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
            for i in 0..n {
                for j in nearest(x, i, cfg.k) {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
            adj.into_iter()
                .map(|mut r| {
                    r.sort_unstable();
                    r.dedup();
                    r.into_iter().map(|j| (j, 1.0)).collect()
                })
                .collect()
        }
    };
    Ok(Affinity { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult {
    /// Completed labels; never `Unlabeled`.
    pub labels: Vec<SeverityLabel>,
    /// Row-stochastic class distributions `[p(mild), p(severe)]`.
    pub class_distributions: Vec<[f64; 2]>,
    pub iterations: usize,
    pub converged: bool,
}

impl PropagationResult {
    pub fn confidence(&self, i: usize) -> f64 {
        let d = self.class_distributions[i];
        d[0].max(d[1])
    }

    /// Class totals `(mild, severe)`.
    pub fn class_totals(&self) -> (usize, usize) {
        let severe = self.labels.iter().filter(|&&l| l == SeverityLabel::Severe).count();
        (self.labels.len() - severe, severe)
    }

    /// Writes `row_index,label,confidence` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["row_index", "label", "confidence"])?;
        for (i, l) in self.labels.iter().enumerate() {
            w.write_record([i.to_string(), l.to_string(), self.confidence(i).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Argmax of a two-class distribution; an exact tie goes to mild-to-moderate.
pub fn label_of(dist: [f64; 2]) -> SeverityLabel {
    if dist[1] > dist[0] {
        SeverityLabel::Severe
    } else {
        SeverityLabel::MildToModerate
    }
}

fn normalize(row: [f64; 2]) -> [f64; 2] {
    let s = row[0] + row[1];
    if s > 0.0 && s.is_finite() {
        [row[0] / s, row[1] / s]
    } else {
        UNIFORM
    }
}

/// One-hot rows for seeded samples, zero rows for the rest.
pub fn seed_matrix(partial: &[SeverityLabel]) -> Vec<[f64; 2]> {
    partial
        .iter()
        .map(|l| match l.class_index() {
            Some(0) => [1.0, 0.0],
            Some(_) => [0.0, 1.0],
            None => [0.0, 0.0],
        })
        .collect()
}

fn check_seeds(n: usize, partial: &[SeverityLabel]) -> Result<()> {
    if partial.len() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{n} labels"),
            found: format!("{} labels", partial.len()),
        });
    }
    for class in 0..2 {
        if !partial.iter().any(|l| l.class_index() == Some(class)) {
            return Err(Error::ClassUnseeded(class));
        }
    }
    Ok(())
}

fn max_abs_change(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| [(x[0] - y[0]).abs(), (x[1] - y[1]).abs()])
        .fold(0.0, f64::max)
}

fn finish(dist: Vec<[f64; 2]>, iterations: usize, converged: bool) -> PropagationResult {
    PropagationResult {
        labels: dist.iter().map(|&d| label_of(d)).collect(),
        class_distributions: dist,
        iterations,
        converged,
    }
}

/// Label propagation over a prebuilt graph.
///
/// Starts seeded rows at their one-hot label and the rest at (0.5, 0.5),
/// then repeats `F <- D^-1 W F` followed by resetting the seeded rows, until
/// the largest entry change drops below `tol`. Rows with zero degree keep
/// the uniform prior.
pub fn label_propagation_graph(w: &Affinity, partial: &[SeverityLabel], cfg: &AffinityConfig) -> Result<PropagationResult> {
    cfg.validate()?;
    check_seeds(w.len(), partial)?;
    let seeds = seed_matrix(partial);
    let mut f: Vec<[f64; 2]> = partial
        .iter()
        .zip(&seeds)
        .map(|(l, s)| if l.is_labeled() { *s } else { UNIFORM })
        .collect();
    let degrees: Vec<f64> = (0..w.len()).map(|i| w.degree(i)).collect();
    let mut next = f.clone();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        for i in 0..w.len() {
            next[i] = if partial[i].is_labeled() {
                seeds[i]
            } else if degrees[i] > 0.0 {
                let mut acc = [0.0, 0.0];
                for &(j, wij) in w.neighbors(i) {
                    acc[0] += wij * f[j][0];
                    acc[1] += wij * f[j][1];
                }
                [acc[0] / degrees[i], acc[1] / degrees[i]]
            } else {
                UNIFORM
            };
        }
        let delta = max_abs_change(&f, &next);
        std::mem::swap(&mut f, &mut next);
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(finish(f.into_iter().map(normalize).collect(), iterations, converged))
}

/// Symmetrically normalized affinity `D^-1/2 W D^-1/2`; zero-degree rows stay zero.
fn normalized_graph(w: &Affinity) -> Vec<Vec<(usize, f64)>> {
    let inv_sqrt: Vec<f64> = (0..w.len())
        .map(|i| {
            let d = w.degree(i);
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    (0..w.len())
        .map(|i| {
            w.neighbors(i)
                .iter()
                .map(|&(j, wij)| (j, inv_sqrt[i] * wij * inv_sqrt[j]))
                .collect()
        })
        .collect()
}

/// Label spreading over a prebuilt graph: iterate
/// `F <- alpha * S F + (1 - alpha) * Y` from `F = Y`.
pub fn label_spreading_graph(w: &Affinity, partial: &[SeverityLabel], cfg: &AffinityConfig) -> Result<PropagationResult> {
    cfg.validate()?;
    check_seeds(w.len(), partial)?;
    let s = normalized_graph(w);
    let y = seed_matrix(partial);
    let mut f = y.clone();
    let mut next = f.clone();
    let alpha = cfg.alpha;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        for (i, row) in s.iter().enumerate() {
            let mut acc = [0.0, 0.0];
            for &(j, sij) in row {
                acc[0] += sij * f[j][0];
                acc[1] += sij * f[j][1];
            }
            next[i] = [
                alpha * acc[0] + (1.0 - alpha) * y[i][0],
                alpha * acc[1] + (1.0 - alpha) * y[i][1],
            ];
        }
        let delta = max_abs_change(&f, &next);
        std::mem::swap(&mut f, &mut next);
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(finish(f.into_iter().map(normalize).collect(), iterations, converged))
}

/// Label propagation on complete features.
pub fn label_propagation(x: &FeatureMatrix, partial: &[SeverityLabel], cfg: &AffinityConfig) -> Result<PropagationResult> {
    let w = build_affinity(x, cfg)?;
    label_propagation_graph(&w, partial, cfg)
}

/// Label spreading on complete features.
pub fn label_spreading(x: &FeatureMatrix, partial: &[SeverityLabel], cfg: &AffinityConfig) -> Result<PropagationResult> {
    let w = build_affinity(x, cfg)?;
    label_spreading_graph(&w, partial, cfg)
}

/// Largest graph accepted by [`closed_form_spreading`].
pub const CLOSED_FORM_MAX_N: usize = 200;

/// Exact spreading fixed point `(I - alpha S)^-1 Y` by dense LU solve.
///
/// Reference for checking the iterative solver at small scale; the iterative
/// limit equals this times `1 - alpha`, so normalized rows agree.
pub fn closed_form_spreading(w: &Affinity, y: &[[f64; 2]], alpha: f64) -> Result<Vec<[f64; 2]>> {
    let n = w.len();
    if n > CLOSED_FORM_MAX_N {
        return Err(Error::config("closed form", format!("n = {n} exceeds {CLOSED_FORM_MAX_N}")));
    }
    if y.len() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{n} rows"),
            found: format!("{} rows", y.len()),
        });
    }
    let s = normalized_graph(w);
    let mut a = DMatrix::<f64>::identity(n, n);
    for (i, row) in s.iter().enumerate() {
        for &(j, sij) in row {
            a[(i, j)] -= alpha * sij;
        }
    }
    let b = DMatrix::from_fn(n, 2, |i, c| y[i][c]);
    let sol = a.lu().solve(&b).ok_or(Error::Singular)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    Ok((0..n).map(|i| [sol[(i, 0)], sol[(i, 1)]]).collect())
}

/// Row-normalized class distributions of a raw score matrix, uniform for
/// all-zero rows.
pub fn normalize_rows(f: &[[f64; 2]]) -> Vec<[f64; 2]> {
    f.iter().map(|&r| normalize(r)).collect()
}

/// Fraction of positions in `mask` where two labelings agree.
pub fn agreement(a: &[SeverityLabel], b: &[SeverityLabel], mask: impl Fn(usize) -> bool) -> f64 {
    let mut total = 0usize;
    let mut same = 0usize;
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if mask(i) {
            total += 1;
            if x == y {
                same += 1;
            }
        }
    }
    if total == 0 {
        1.0
    } else {
        same as f64 / total as f64
    }
}

//! Soft-margin RBF support vector machine trained by SMO.
//!
//! The solver works on the dual
//!
//! ```text
//! min_a  1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j) - sum_i a_i
//! s.t.   0 <= a_i <= C,  sum_i a_i y_i = 0
//! ```
//!
//! and picks each working pair with the second-order rule of Fan, Chen and
//! Lin (maximal violating `i`, then the `j` with the largest guaranteed
//! objective decrease). The gradient is kept up to date, so stopping is
//! the exact maximal KKT violation test `m(a) - M(a) < tol`.

use std::collections::{HashMap, VecDeque};
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::platt::{platt_calibrate, PlattScaling};
use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};
use crate::semi_supervised::default_gamma;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvmKernel {
    #[default]
    Rbf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub kernel: SvmKernel,
    pub c: f64,
    /// `None` means `1 / (d * variance of all training entries)`.
    pub gamma: Option<f64>,
    pub smo_tol: f64,
    /// Cap on SMO pair updates; `None` means `max(10 * n, 10_000)`.
    pub max_passes: Option<usize>,
    /// Fit a Platt sigmoid on the training scores.
    pub probability: bool,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            kernel: SvmKernel::Rbf,
            c: 1.0,
            gamma: None,
            smo_tol: 1e-3,
            max_passes: None,
            probability: true,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::config("svm.c", format!("must be positive, got {}", self.c)));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::config("svm.gamma", format!("must be positive, got {g}")));
            }
        }
        if !(self.smo_tol > 0.0) {
            return Err(Error::config("svm.smo_tol", "must be positive"));
        }
        if self.max_passes == Some(0) {
            return Err(Error::config("svm.max_passes", "must be positive"));
        }
        Ok(())
    }

    pub fn pass_cap(&self, n: usize) -> usize {
        self.max_passes.unwrap_or((10 * n).max(10_000))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    /// Offset `b` of `f(x) = sum a_i y_i K(x_i, x) + b`.
    pub bias: f64,
    /// Dual objective value (the minimized form).
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

const TAU: f64 = 1e-12;
/// Kernel cache budget in bytes.
const CACHE_BYTES: usize = 256 << 20;

/// FIFO cache of kernel rows.
struct KernelCache<'a> {
    x: &'a Matrix,
    gamma: f64,
    rows: HashMap<usize, Rc<[f64]>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> KernelCache<'a> {
    fn new(x: &'a Matrix, gamma: f64) -> Self {
        let capacity = (CACHE_BYTES / (8 * x.rows().max(1))).max(2);
        KernelCache {
            x,
            gamma,
            rows: HashMap::new(),
            order: VecDeque::new(),
            capacity,
        }
    }

    fn row(&mut self, i: usize) -> Rc<[f64]> {
        if let Some(r) = self.rows.get(&i) {
            return Rc::clone(r);
        }
        let xi = self.x.row(i);
        let r: Rc<[f64]> = self
            .x
            .row_iter()
            .map(|xj| (-self.gamma * squared_distance(xi, xj)).exp())
            .collect();
        if self.order.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.rows.remove(&old);
            }
        }
        self.order.push_back(i);
        self.rows.insert(i, Rc::clone(&r));
        r
    }
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    (-gamma * squared_distance(a, b)).exp()
}

/// Runs SMO on the RBF dual for rows of `x` with labels `y` in `{-1, +1}`.
pub fn smo_solve(x: &Matrix, y: &[f64], c: f64, gamma: f64, tol: f64, max_iter: usize) -> SmoSolution {
    let n = x.rows();
    let mut cache = KernelCache::new(x, gamma);
    let mut alpha = vec![0.0; n];
    // gradient of the dual objective: G_i = sum_j Q_ij a_j - 1
    let mut grad = vec![-1.0; n];
    let up = |a: f64, yi: f64| if yi > 0.0 { a < c } else { a > 0.0 };
    let low = |a: f64, yi: f64| if yi > 0.0 { a > 0.0 } else { a < c };
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // i: maximal violator in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v >= gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        if i == usize::MAX {
            converged = true;
            break;
        }
        let ki = cache.row(i);
        // j: largest second-order decrease in I_low
        let mut gmin_neg = f64::NEG_INFINITY;
        let mut best_obj = f64::INFINITY;
        let mut j = usize::MAX;
        for t in 0..n {
            if !low(alpha[t], y[t]) {
                continue;
            }
            let v = y[t] * grad[t];
            if v >= gmin_neg {
                gmin_neg = v;
            }
            let b = gmax + v;
            if b > 0.0 {
                let quad = (2.0 - 2.0 * ki[t]).max(0.0);
                let quad = if quad > 0.0 { quad } else { TAU };
                let obj = -(b * b) / quad;
                if obj <= best_obj {
                    best_obj = obj;
                    j = t;
                }
            }
        }
        if gmax + gmin_neg < tol || j == usize::MAX {
            converged = true;
            break;
        }
        iterations += 1;
        let kj = cache.row(j);
        let (yi, yj) = (y[i], y[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let kij = ki[j];
        let quad = {
            let q = 2.0 - 2.0 * kij;
            if q > 0.0 {
                q
            } else {
                TAU
            }
        };
        if yi != yj {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (yi * ki[t] * di + yj * kj[t] * dj);
        }
    }

    // b from free vectors, or the middle of the feasible interval
    let (mut ub, mut lb, mut sum_free, mut n_free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        0.5 * (ub + lb)
    };
    let objective = 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>();
    SmoSolution {
        alpha,
        bias: -rho,
        objective,
        iterations,
        converged,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub gamma: f64,
    pub c: f64,
    pub support_vectors: Matrix,
    /// `a_i * y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub platt: Option<PlattScaling>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SvmModel {
    pub fn decision_row(&self, row: &[f64]) -> f64 {
        self.support_vectors
            .row_iter()
            .zip(&self.dual_coef)
            .map(|(sv, &w)| w * rbf(sv, row, self.gamma))
            .sum::<f64>()
            + self.bias
    }

    /// `P(severe)` from the Platt sigmoid, or the logistic of the raw score
    /// when no sigmoid was fitted.
    pub fn probability(&self, score: f64) -> f64 {
        match &self.platt {
            Some(p) => p.probability(score),
            None => PlattScaling { a: -1.0, b: 0.0 }.probability(score),
        }
    }
}

pub fn svm_decision(model: &SvmModel, x: &Matrix) -> Vec<f64> {
    x.row_iter().map(|r| model.decision_row(r)).collect()
}

/// Trains on labels `y` in `{-1, +1}`. Hitting the pass cap is not an error;
/// the model is returned with `converged = false`.
pub fn train_svm_smo(x: &Matrix, y: &[f64], params: &SvmParams) -> Result<SvmModel> {
    params.validate()?;
    let n = x.rows();
    if y.len() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{n} labels"),
            found: format!("{} labels", y.len()),
        });
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if let Some(v) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::Numeric(format!("svm labels must be -1 or +1, got {v}")));
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::DegenerateLabels);
    }
    let gamma = params.gamma.unwrap_or_else(|| default_gamma(x));
    let sol = smo_solve(x, y, params.c, gamma, params.smo_tol, params.pass_cap(n));
    if !sol.converged {
        log::warn!("smo stopped at the pass cap after {} updates", sol.iterations);
    }
    let sv: Vec<usize> = (0..n).filter(|&i| sol.alpha[i] > 1e-8).collect();
    let mut model = SvmModel {
        gamma,
        c: params.c,
        support_vectors: x.select_rows(&sv),
        dual_coef: sv.iter().map(|&i| sol.alpha[i] * y[i]).collect(),
        bias: sol.bias,
        platt: None,
        objective: sol.objective,
        iterations: sol.iterations,
        converged: sol.converged,
    };
    if !model.bias.is_finite() || model.dual_coef.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("smo produced non-finite coefficients".into()));
    }
    if params.probability {
        let scores = svm_decision(&model, x);
        model.platt = Some(platt_calibrate(&scores, y)?);
    }
    Ok(model)
}

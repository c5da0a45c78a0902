//! Sigmoid calibration of decision scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `P(y = +1 | s) = 1 / (1 + exp(a * s + b))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattScaling {
    pub a: f64,
    pub b: f64,
}

impl PlattScaling {
    pub fn probability(&self, score: f64) -> f64 {
        let f = self.a * score + self.b;
        if f >= 0.0 {
            let e = (-f).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + f.exp())
        }
    }
}

/// Negative log-likelihood of the smoothed targets under `(a, b)`.
fn objective(scores: &[f64], targets: &[f64], a: f64, b: f64) -> f64 {
    scores
        .iter()
        .zip(targets)
        .map(|(&s, &t)| {
            let f = a * s + b;
            if f >= 0.0 {
                t * f + (-f).exp().ln_1p()
            } else {
                (t - 1.0) * f + f.exp().ln_1p()
            }
        })
        .sum()
}

/// Fits `(a, b)` by Newton's method with backtracking on the cross-entropy
/// against Platt's smoothed targets `(N+ + 1) / (N+ + 2)` and `1 / (N- + 2)`.
/// The smoothing keeps the optimum finite for perfectly separated scores.
///
/// `y` holds the classes as `+1` / `-1`.
pub fn platt_calibrate(scores: &[f64], y: &[f64]) -> Result<PlattScaling> {
    if scores.len() != y.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} labels", scores.len()),
            found: format!("{} labels", y.len()),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("non-finite decision score".into()));
    }
    let n_pos = y.iter().filter(|&&v| v > 0.0).count();
    let n_neg = y.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateLabels);
    }
    let hi = (n_pos as f64 + 1.0) / (n_pos as f64 + 2.0);
    let lo = 1.0 / (n_neg as f64 + 2.0);
    let targets: Vec<f64> = y.iter().map(|&v| if v > 0.0 { hi } else { lo }).collect();

    const MAX_ITER: usize = 100;
    const MIN_STEP: f64 = 1e-10;
    const SIGMA: f64 = 1e-12;
    const EPS: f64 = 1e-5;

    let mut a = 0.0;
    let mut b = ((n_neg as f64 + 1.0) / (n_pos as f64 + 1.0)).ln();
    let mut fval = objective(scores, &targets, a, b);
    for _ in 0..MAX_ITER {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (SIGMA, SIGMA, 0.0, 0.0, 0.0);
        for (&s, &t) in scores.iter().zip(&targets) {
            let f = a * s + b;
            let (p, q) = if f >= 0.0 {
                let e = (-f).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = f.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += s * s * d2;
            h22 += d2;
            h21 += s * d2;
            let d1 = t - p;
            g1 += s * d1;
            g2 += d1;
        }
        if g1.abs() < EPS && g2.abs() < EPS {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(scores, &targets, na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < MIN_STEP {
            log::warn!("platt scaling line search stalled");
            break;
        }
    }
    Ok(PlattScaling { a, b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn symmetric_scores_give_zero_offset() {
        let scores = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];
        let y = [-1.0, -1.0, 1.0, -1.0, 1.0, 1.0];
        let p = platt_calibrate(&scores, &y).unwrap();
        assert!(p.b.abs() < 1e-6, "b = {}", p.b);
        assert!(p.a < 0.0);
    }

    #[test]
    fn separated_scores_stay_finite() {
        let scores = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0];
        let y = [-1.0, -1.0, -1.0, 1.0, 1.0, 1.0];
        let p = platt_calibrate(&scores, &y).unwrap();
        assert!(p.a.is_finite() && p.b.is_finite());
        assert!(p.probability(3.0) < 1.0 && p.probability(-3.0) > 0.0);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(platt_calibrate(&[0.1, 0.2], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn probability_is_stable_at_extremes() {
        let p = PlattScaling { a: -1.0, b: 0.0 };
        assert_eq!(p.probability(0.0), 0.5);
        assert!(p.probability(1e4) <= 1.0 && p.probability(1e4) > 0.99);
        assert!(p.probability(-1e4) >= 0.0 && p.probability(-1e4) < 0.01);
    }

    proptest! {
        #[test]
        fn increasing_in_score_when_slope_negative(
            a in -5.0f64..-0.01, b in -3.0f64..3.0, s in -3.0f64..3.0, ds in 0.01f64..1.0
        ) {
            let p = PlattScaling { a, b };
            prop_assert!(p.probability(s + ds) > p.probability(s));
        }
    }
}

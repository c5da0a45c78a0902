//! Confusion matrix, threshold metrics and ROC analysis. Severe (class 1)
//! is the positive class.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tp: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} predictions", y_true.len()),
            found: format!("{} predictions", y_pred.len()),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (0, 0) => cm.tn += 1,
            (0, 1) => cm.fp += 1,
            (1, 0) => cm.fn_ += 1,
            (1, 1) => cm.tp += 1,
            _ => return Err(Error::Numeric(format!("labels must be 0 or 1, got ({t}, {p})"))),
        }
    }
    Ok(cm)
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tn + self.fp + self.fn_ + self.tp
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        self.tn += other.tn;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tp += other.tp;
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    /// `tp / (tp + fp)`, 0 when nothing is predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// `tp / (tp + fn)`, 0 when there are no positives.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall, 0 when both are 0.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    /// Metrics that hit a zero denominator and were reported as 0.
    pub fn zero_division_warnings(&self) -> Vec<&'static str> {
        let mut w = Vec::new();
        if self.total() == 0 {
            w.push("accuracy undefined (no samples)");
        }
        if self.tp + self.fp == 0 {
            w.push("precision undefined (no predicted positives)");
        }
        if self.tp + self.fn_ == 0 {
            w.push("recall undefined (no actual positives)");
        }
        if self.precision() + self.recall() == 0.0 {
            w.push("f1 undefined (precision and recall are 0)");
        }
        w
    }
}

fn check_scores(scores: &[f64], y_true: &[usize]) -> Result<(usize, usize)> {
    if scores.len() != y_true.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} scores", y_true.len()),
            found: format!("{} scores", scores.len()),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("non-finite score".into()));
    }
    if let Some(&bad) = y_true.iter().find(|&&c| c > 1) {
        return Err(Error::Numeric(format!("label {bad} is not binary")));
    }
    let pos = y_true.iter().filter(|&&c| c == 1).count();
    let neg = y_true.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateLabels);
    }
    Ok((pos, neg))
}

/// Rows sorted by descending score, grouped into runs of equal score:
/// `(score, positives, negatives)`.
fn tie_groups(scores: &[f64], y_true: &[usize]) -> Vec<(f64, usize, usize)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups: Vec<(f64, usize, usize)> = Vec::new();
    for i in order {
        let s = scores[i];
        match groups.last_mut() {
            Some(g) if g.0 == s => {}
            _ => groups.push((s, 0, 0)),
        }
        let g = groups.last_mut().expect("just pushed");
        if y_true[i] == 1 {
            g.1 += 1;
        } else {
            g.2 += 1;
        }
    }
    groups
}

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs where the
/// positive scores higher, ties counted half. Computed exactly in integer
/// half-units before the final division.
pub fn roc_auc(scores: &[f64], y_true: &[usize]) -> Result<f64> {
    let (pos, neg) = check_scores(scores, y_true)?;
    let mut neg_below = neg as u128;
    let mut twice: u128 = 0;
    for (_, p, n) in tie_groups(scores, y_true) {
        neg_below -= n as u128;
        twice += 2 * p as u128 * neg_below + p as u128 * n as u128;
    }
    Ok((twice as f64 / 2.0) / (pos as f64 * neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Rows with `score >= threshold` are called positive; the first point
    /// uses `+inf`.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// One point per distinct score in descending order, preceded by `(0, 0)`.
/// The last point is `(1, 1)`.
pub fn roc_curve(scores: &[f64], y_true: &[usize]) -> Result<Vec<RocPoint>> {
    let (pos, neg) = check_scores(scores, y_true)?;
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0, 0);
    for (s, p, n) in tie_groups(scores, y_true) {
        tp += p;
        fp += n;
        points.push(RocPoint {
            threshold: s,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(points)
}

/// Trapezoidal area under a ROC curve.
pub fn trapezoid_auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

pub fn write_roc_csv<W: Write>(points: &[RocPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["threshold", "fpr", "tpr"])?;
    for p in points {
        w.write_record([p.threshold.to_string(), p.fpr.to_string(), p.tpr.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

//! Column-mean imputation and z-score standardization, with the fitted
//! statistics kept separate from their application so cross-validation can
//! fit on training rows only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputerModel {
    pub columns: Vec<String>,
    #[serde(rename = "means")]
    pub column_means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerModel {
    pub columns: Vec<String>,
    #[serde(rename = "means")]
    pub column_means: Vec<f64>,
    /// Population standard deviations.
    #[serde(rename = "stds")]
    pub column_stds: Vec<f64>,
    /// Columns whose variance is zero; these are centered but not scaled.
    pub zero_variance: Vec<bool>,
}

fn check_columns(model_cols: &[String], x: &FeatureMatrix) -> Result<()> {
    if model_cols != x.columns() {
        return Err(Error::ShapeMismatch {
            expected: format!("columns {model_cols:?}"),
            found: format!("columns {:?}", x.columns()),
        });
    }
    Ok(())
}

/// Means over observed entries of each column.
pub fn fit_imputer(x: &FeatureMatrix) -> Result<ImputerModel> {
    if x.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut means = Vec::with_capacity(x.n_cols());
    for j in 0..x.n_cols() {
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..x.n_rows() {
            if let Some(v) = x.value(i, j) {
                sum += v;
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::AllMissingColumn(x.columns()[j].clone()));
        }
        means.push(sum / count as f64);
    }
    Ok(ImputerModel {
        columns: x.columns().to_vec(),
        column_means: means,
    })
}

impl ImputerModel {
    pub fn apply(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        check_columns(&self.columns, x)?;
        Ok(x.filled(|j| self.column_means[j]))
    }
}

pub fn apply_imputer(model: &ImputerModel, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    model.apply(x)
}

pub fn fit_scaler(x: &FeatureMatrix) -> Result<ScalerModel> {
    if x.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let values = x.to_dense()?;
    let n = values.rows() as f64;
    let d = values.cols();
    let mut means = vec![0.0; d];
    for row in values.row_iter() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut vars = vec![0.0; d];
    for row in values.row_iter() {
        for ((s, v), m) in vars.iter_mut().zip(row).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    let stds: Vec<f64> = vars.iter().map(|s| (s / n).sqrt()).collect();
    // spread below this relative size is rounding noise around a constant column
    let zero_variance = stds
        .iter()
        .zip(&means)
        .map(|(s, m)| *s <= 1e-12 * m.abs().max(1.0))
        .collect();
    Ok(ScalerModel {
        columns: x.columns().to_vec(),
        column_means: means,
        column_stds: stds,
        zero_variance,
    })
}

impl ScalerModel {
    pub fn apply(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        check_columns(&self.columns, x)?;
        if x.has_missing() {
            return Err(Error::Numeric("scaler applied to data with missing values".into()));
        }
        Ok(x.map_values(|j, v| {
            let centered = v - self.column_means[j];
            if self.zero_variance[j] {
                centered
            } else {
                centered / self.column_stds[j]
            }
        }))
    }
}

pub fn apply_scaler(model: &ScalerModel, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    model.apply(x)
}

/// Imputer and scaler fitted together on one set of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub imputer: ImputerModel,
    pub scaler: ScalerModel,
}

impl Preprocessor {
    pub fn fit(x: &FeatureMatrix) -> Result<Self> {
        let imputer = fit_imputer(x)?;
        let scaler = fit_scaler(&imputer.apply(x)?)?;
        Ok(Preprocessor { imputer, scaler })
    }

    pub fn apply(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.scaler.apply(&self.imputer.apply(x)?)
    }
}

//! Random forest, k-nearest neighbors and RBF support vector machine.
//!
//! All three take a dense, standardized feature matrix and class indices
//! (0 = mild-to-moderate, 1 = severe). [`train`] dispatches on a
//! [`ClassifierSpec`] and returns a [`TrainedModel`], which serializes to a
//! versioned JSON document via [`ModelDocument`].

pub mod forest;
pub mod knn;
pub mod platt;
pub mod svm;
pub mod tree;

use serde::{Deserialize, Serialize};

pub use forest::{train_random_forest, ForestParams, RandomForest};
pub use knn::{knn_predict, select_k, KSelection, KnnModel, KnnParams, KnnPrediction};
pub use platt::{platt_calibrate, PlattScaling};
pub use svm::{smo_solve, svm_decision, train_svm_smo, SmoSolution, SvmModel, SvmParams};
pub use tree::{gini_impurity, train_decision_tree, DecisionTree, Node, TreeParams};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    RandomForest(ForestParams),
    Knn(KnnParams),
    Svm(SvmParams),
}

impl ClassifierSpec {
    /// The three classifiers with their default settings.
    pub fn defaults() -> Vec<ClassifierSpec> {
        vec![
            ClassifierSpec::RandomForest(ForestParams::default()),
            ClassifierSpec::Knn(KnnParams::default()),
            ClassifierSpec::Svm(SvmParams::default()),
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::RandomForest(_) => "random_forest",
            ClassifierSpec::Knn(_) => "knn",
            ClassifierSpec::Svm(_) => "svm",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClassifierSpec::RandomForest(p) => p.validate(),
            ClassifierSpec::Knn(p) => p.validate(),
            ClassifierSpec::Svm(p) => p.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    RandomForest(RandomForest),
    Knn(KnnModel),
    Svm(SvmModel),
}

/// Trains the classifier described by `spec`. A KNN spec must carry a fixed
/// `k` (see [`select_k`]).
pub fn train(spec: &ClassifierSpec, x: &Matrix, y: &[usize]) -> Result<TrainedModel> {
    spec.validate()?;
    match spec {
        ClassifierSpec::RandomForest(p) => Ok(TrainedModel::RandomForest(train_random_forest(x, y, p)?)),
        ClassifierSpec::Knn(p) => {
            let k = p
                .k
                .ok_or_else(|| Error::config("knn.k", "k is unset; run select_k first"))?;
            Ok(TrainedModel::Knn(KnnModel::fit(x, y, k)?))
        }
        ClassifierSpec::Svm(p) => {
            forest::check_binary(y, x.rows())?;
            let signed: Vec<f64> = y.iter().map(|&c| if c == 1 { 1.0 } else { -1.0 }).collect();
            Ok(TrainedModel::Svm(train_svm_smo(x, &signed, p)?))
        }
    }
}

impl TrainedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            TrainedModel::RandomForest(_) => "random_forest",
            TrainedModel::Knn(_) => "knn",
            TrainedModel::Svm(_) => "svm",
        }
    }

    /// Class probabilities `[p(0), p(1)]` per row.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<[f64; 2]>> {
        match self {
            TrainedModel::RandomForest(f) => Ok(f.predict_proba(x)),
            TrainedModel::Knn(m) => Ok(m.predict(x)?.proportions),
            TrainedModel::Svm(m) => Ok(svm_decision(m, x)
                .into_iter()
                .map(|s| {
                    let p = m.probability(s);
                    [1.0 - p, p]
                })
                .collect()),
        }
    }

    /// Hard labels: `p(1) > 0.5` for the forest and KNN, `score > 0` for
    /// the SVM.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        match self {
            TrainedModel::Svm(m) => Ok(svm_decision(m, x).into_iter().map(|s| usize::from(s > 0.0)).collect()),
            _ => Ok(self.predict_proba(x)?.into_iter().map(|p| usize::from(p[1] > 0.5)).collect()),
        }
    }

    /// Ranking scores for ROC analysis: `p(1)` for the forest and KNN, the
    /// raw decision value for the SVM.
    pub fn scores(&self, x: &Matrix) -> Result<Vec<f64>> {
        match self {
            TrainedModel::Svm(m) => Ok(svm_decision(m, x)),
            _ => Ok(self.predict_proba(x)?.into_iter().map(|p| p[1]).collect()),
        }
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// On-disk form of a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    /// Feature column names in training order.
    pub columns: Vec<String>,
    pub model: TrainedModel,
}

impl ModelDocument {
    pub fn new(columns: Vec<String>, model: TrainedModel) -> Self {
        ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            columns,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(s)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::parse(
                "model document",
                format!("unsupported format_version {}", doc.format_version),
            ));
        }
        Ok(doc)
    }
}

//! Stratified cross-validation and the reported metric suite.

mod folds;
mod metrics;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use folds::{stratified_kfold, FoldAssignment};
pub use metrics::{
    confusion_matrix, roc_auc, roc_curve, trapezoid_auc, write_roc_csv, ConfusionMatrix, RocPoint,
};

use crate::classifiers::{select_k, train, ClassifierSpec, TrainedModel};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::FeatureMatrix;
use crate::preprocessing::Preprocessor;

/// Where the imputer and scaler are fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreprocessMode {
    /// On each training split only.
    #[default]
    LeakageSafe,
    /// Once on the whole dataset, before splitting.
    PaperFaithful,
}

impl PreprocessMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PreprocessMode::LeakageSafe => "leakage_safe",
            PreprocessMode::PaperFaithful => "paper_faithful",
        }
    }
}

impl fmt::Display for PreprocessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PreprocessMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leakage_safe" => Ok(PreprocessMode::LeakageSafe),
            "paper_faithful" => Ok(PreprocessMode::PaperFaithful),
            other => Err(Error::config(
                "mode",
                format!("expected leakage_safe or paper_faithful, got {other:?}"),
            )),
        }
    }
}

/// Dense train and test matrices for one split. With `full` set the given
/// preprocessor is applied to both sides; otherwise one is fitted on the
/// training rows.
pub fn prepare_split(
    x: &FeatureMatrix,
    train: &[usize],
    test: &[usize],
    full: Option<&Preprocessor>,
) -> Result<(Matrix, Matrix)> {
    let xtr = x.select_rows(train);
    let xte = x.select_rows(test);
    let fitted;
    let pre = match full {
        Some(p) => p,
        None => {
            fitted = Preprocessor::fit(&xtr)?;
            &fitted
        }
    };
    Ok((pre.apply(&xtr)?.to_dense()?, pre.apply(&xte)?.to_dense()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub folds: usize,
    pub seed: u64,
    pub mode: PreprocessMode,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 5,
            seed: 42,
            mode: PreprocessMode::LeakageSafe,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Population standard deviation across folds.
    pub std: f64,
    pub per_fold: Vec<f64>,
}

impl MetricSummary {
    pub fn from_folds(per_fold: Vec<f64>) -> Self {
        let n = per_fold.len() as f64;
        let mean = per_fold.iter().sum::<f64>() / n;
        let var = per_fold.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        MetricSummary {
            mean,
            std: var.sqrt(),
            per_fold,
        }
    }
}

impl fmt::Display for MetricSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4} (± {:.4})", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: MetricSummary,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub f1: MetricSummary,
    pub roc_auc: MetricSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classifier: String,
    pub folds: usize,
    pub seed: u64,
    pub mode: PreprocessMode,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub selected_k: Option<usize>,
    pub metrics: MetricSet,
    /// Summed over folds.
    pub confusion: ConfusionMatrix,
    pub warnings: Vec<String>,
    /// ROC curve of each test fold; written to separate CSV files.
    #[serde(skip)]
    pub roc: Vec<Vec<RocPoint>>,
}

impl MetricsReport {
    /// `accuracy precision recall f1 roc_auc`, each as `mean (± std)`.
    pub fn table_row(&self) -> String {
        let m = &self.metrics;
        format!(
            "{:<14} {} {} {} {} {}",
            self.classifier, m.accuracy, m.precision, m.recall, m.f1, m.roc_auc
        )
    }

    pub fn table_header() -> String {
        format!(
            "{:<14} {:<17} {:<17} {:<17} {:<17} {:<17}",
            "classifier", "accuracy", "precision", "recall", "f1", "roc_auc"
        )
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

struct FoldResult {
    cm: ConfusionMatrix,
    auc: f64,
    roc: Vec<RocPoint>,
    warnings: Vec<String>,
}

fn evaluate_fold(spec: &ClassifierSpec, xtr: &Matrix, ytr: &[usize], xte: &Matrix, yte: &[usize], fold: usize) -> Result<FoldResult> {
    let model = train(spec, xtr, ytr)?;
    let pred = model.predict(xte)?;
    let scores = model.scores(xte)?;
    let cm = confusion_matrix(yte, &pred)?;
    let mut warnings: Vec<String> = cm
        .zero_division_warnings()
        .into_iter()
        .map(|w| format!("fold {fold}: {w}; reported as 0"))
        .collect();
    if let TrainedModel::Svm(m) = &model {
        if !m.converged {
            warnings.push(format!("fold {fold}: smo stopped at the pass cap after {} updates", m.iterations));
        }
    }
    Ok(FoldResult {
        cm,
        auc: roc_auc(&scores, yte)?,
        roc: roc_curve(&scores, yte)?,
        warnings,
    })
}

/// Stratified k-fold evaluation of one classifier.
///
/// Per fold: preprocess (per `cfg.mode`), train on the other folds, predict
/// the held-out fold. Hard labels use the model's own threshold; AUC uses
/// the model's ranking scores. A KNN spec without a fixed `k` first runs
/// [`select_k`] over the whole dataset with the same seed and mode.
pub fn cross_validate(x: &FeatureMatrix, y: &[usize], spec: &ClassifierSpec, cfg: &CvConfig) -> Result<MetricsReport> {
    spec.validate()?;
    if y.len() != x.n_rows() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} labels", x.n_rows()),
            found: format!("{} labels", y.len()),
        });
    }
    let mut spec = spec.clone();
    let mut selected_k = None;
    if let ClassifierSpec::Knn(p) = &mut spec {
        if p.k.is_none() {
            let sel = select_k(x, y, &p.candidates, p.cv_folds, cfg.seed, cfg.mode)?;
            log::info!("knn: selected k = {}", sel.k);
            p.k = Some(sel.k);
            selected_k = Some(sel.k);
        }
    }
    let assignment = stratified_kfold(y, cfg.folds, cfg.seed)?;
    let full = match cfg.mode {
        PreprocessMode::PaperFaithful => Some(Preprocessor::fit(x)?),
        PreprocessMode::LeakageSafe => None,
    };
    let mut results = Vec::with_capacity(cfg.folds);
    for fold in 0..cfg.folds {
        let (train_idx, test_idx) = assignment.split(fold);
        let (xtr, xte) = prepare_split(x, &train_idx, &test_idx, full.as_ref())?;
        let ytr: Vec<usize> = train_idx.iter().map(|&i| y[i]).collect();
        let yte: Vec<usize> = test_idx.iter().map(|&i| y[i]).collect();
        log::debug!("{}: fold {fold} ({} train, {} test)", spec.name(), ytr.len(), yte.len());
        results.push(evaluate_fold(&spec, &xtr, &ytr, &xte, &yte, fold)?);
    }
    let summary = |f: &dyn Fn(&FoldResult) -> f64| MetricSummary::from_folds(results.iter().map(f).collect());
    let metrics = MetricSet {
        accuracy: summary(&|r| r.cm.accuracy()),
        precision: summary(&|r| r.cm.precision()),
        recall: summary(&|r| r.cm.recall()),
        f1: summary(&|r| r.cm.f1()),
        roc_auc: summary(&|r| r.auc),
    };
    let mut confusion = ConfusionMatrix::default();
    for r in &results {
        confusion.add(&r.cm);
    }
    let warnings = results.iter().flat_map(|r| r.warnings.iter().cloned()).collect();
    Ok(MetricsReport {
        classifier: spec.name().to_string(),
        folds: cfg.folds,
        seed: cfg.seed,
        mode: cfg.mode,
        selected_k,
        metrics,
        confusion,
        warnings,
        roc: results.into_iter().map(|r| r.roc).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{ForestParams, KnnParams, SvmParams};
    use rand_distr::{Distribution, Normal};

    fn blobs(n: usize, sep: f64) -> (FeatureMatrix, Vec<usize>) {
        let mut rng = crate::rng::stream_rng(11, 0);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let shift = c as f64 * sep;
            rows.push(vec![Some(normal.sample(&mut rng) + shift), Some(normal.sample(&mut rng))]);
            y.push(c);
        }
        rows[3][1] = None;
        (FeatureMatrix::from_optional_rows(vec!["a".into(), "b".into()], &rows).unwrap(), y)
    }

    #[test]
    fn population_std_and_format() {
        let s = MetricSummary::from_folds(vec![0.9, 0.95, 0.92, 0.93, 0.9155]);
        let mean = (0.9 + 0.95 + 0.92 + 0.93 + 0.9155) / 5.0;
        assert!((s.mean - mean).abs() < 1e-15);
        let var: f64 = [0.9, 0.95, 0.92, 0.93, 0.9155].iter().map(|v: &f64| (v - mean).powi(2)).sum::<f64>() / 5.0;
        assert!((s.std - var.sqrt()).abs() < 1e-15);
        let t = MetricSummary { mean: 0.9251, std: 0.0105, per_fold: vec![] };
        assert_eq!(t.to_string(), "0.9251 (± 0.0105)");
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("paper_faithful".parse::<PreprocessMode>().unwrap(), PreprocessMode::PaperFaithful);
        assert!("other".parse::<PreprocessMode>().is_err());
    }

    #[test]
    fn blobs_are_classified_by_every_model() {
        let (x, y) = blobs(300, 4.0);
        let specs = [
            ClassifierSpec::RandomForest(ForestParams { n_trees: 20, ..Default::default() }),
            ClassifierSpec::Knn(KnnParams::default()),
            ClassifierSpec::Svm(SvmParams::default()),
        ];
        for spec in &specs {
            for mode in [PreprocessMode::LeakageSafe, PreprocessMode::PaperFaithful] {
                let r = cross_validate(&x, &y, spec, &CvConfig { mode, ..Default::default() }).unwrap();
                assert!(r.metrics.accuracy.mean >= 0.95, "{} {:?}", r.classifier, r.metrics.accuracy);
                assert_eq!(r.confusion.total(), 300);
                assert_eq!(r.roc.len(), 5);
                assert_eq!(r.metrics.roc_auc.per_fold.len(), 5);
                assert_eq!(r.selected_k.is_some(), r.classifier == "knn");
            }
        }
    }

    #[test]
    fn report_json_shape_and_determinism() {
        let (x, y) = blobs(100, 3.0);
        let spec = ClassifierSpec::RandomForest(ForestParams { n_trees: 5, ..Default::default() });
        let a = cross_validate(&x, &y, &spec, &CvConfig::default()).unwrap().to_json().unwrap();
        let b = cross_validate(&x, &y, &spec, &CvConfig::default()).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        let v: serde_json::Value = serde_json::from_str(&a).unwrap();
        for key in ["classifier", "folds", "seed", "mode", "metrics", "confusion", "warnings"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v.get("selected_k").is_none());
        for m in ["accuracy", "precision", "recall", "f1", "roc_auc"] {
            assert_eq!(v["metrics"][m]["per_fold"].as_array().unwrap().len(), 5);
        }
        assert_eq!(v["mode"], "leakage_safe");
    }
}

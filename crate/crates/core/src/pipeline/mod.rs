//! Stage runner: acquire samples, label, propagate, evaluate, report.
//!
//! Every stage reads its inputs from and writes its outputs to
//! `config.output_dir`, so stages can run one at a time:
//!
//! | stage     | reads                                  | writes |
//! |-----------|----------------------------------------|--------|
//! | synth     | config                                 | `samples.csv` |
//! | extract   | raw tables in `input.raw_dir`          | `samples.csv` |
//! | label     | `samples.csv`                          | `labels.csv` |
//! | propagate | `samples.csv`, `labels.csv`            | `propagated_labels.csv`, `propagation.json` |
//! | evaluate  | `samples.csv`, `propagated_labels.csv` | `metrics_<classifier>.json`, `roc_<classifier>_fold<i>.csv` |
//! | report    | all of the above                       | `report.txt`, `run_manifest.json` |
//!
//! Files are written under a `.partial` name and renamed once complete; a
//! failed stage leaves its `.partial` files behind.

mod config;

use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{InputConfig, InputSource, LabelMethod, PipelineConfig, SyntheticSettings};

use crate::error::{Error, ErrorKind, Result};
use crate::evaluation::{cross_validate, write_roc_csv, MetricsReport};
use crate::ingestion::{
    extract_samples, generate_synthetic_cohort, read_samples_csv, write_samples_csv, RawTables,
};
use crate::labeling::{label_dataset, read_labels_csv, write_labels_csv, LabelSummary};
use crate::model::{encode_features, PatientSample, SeverityLabel};
use crate::preprocessing::Preprocessor;
use crate::semi_supervised::{agreement, build_affinity, label_propagation_graph, label_spreading_graph};

pub const SAMPLES_FILE: &str = "samples.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const PROPAGATED_FILE: &str = "propagated_labels.csv";
pub const PROPAGATION_FILE: &str = "propagation.json";
pub const REPORT_FILE: &str = "report.txt";
pub const MANIFEST_FILE: &str = "run_manifest.json";
pub const MANIFEST_FORMAT_VERSION: u32 = 1;

pub fn metrics_file(classifier: &str) -> String {
    format!("metrics_{classifier}.json")
}

pub fn roc_file(classifier: &str, fold: usize) -> String {
    format!("roc_{classifier}_fold{fold}.csv")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Extract,
    Synth,
    Label,
    Propagate,
    Evaluate,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Extract => "extract",
            Stage::Synth => "synth",
            Stage::Label => "label",
            Stage::Propagate => "propagate",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An error tagged with the stage it came from.
#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub source: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

impl StageError {
    /// 2 for configuration errors, 3 for data errors, 4 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self.source.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

pub type StageResult<T> = std::result::Result<T, StageError>;

/// Writes `dir/name` through `dir/name.partial`.
pub fn write_artifact(dir: &Path, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let target = dir.join(name);
    let partial = dir.join(format!("{name}.partial"));
    let mut w = BufWriter::new(File::create(&partial)?);
    body(&mut w)?;
    w.flush()?;
    drop(w);
    fs::rename(&partial, &target)?;
    Ok(target)
}

fn open(dir: &Path, name: &str) -> Result<BufReader<File>> {
    let path = dir.join(name);
    File::open(&path).map(BufReader::new).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

/// Summary of the semi-supervised stage, saved as `propagation.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationSummary {
    pub method: LabelMethod,
    pub propagation_iterations: usize,
    pub propagation_converged: bool,
    pub spreading_iterations: usize,
    pub spreading_converged: bool,
    /// Share of initially unlabeled samples given the same label by both
    /// methods.
    pub agreement_on_unlabeled: f64,
    pub mild: usize,
    pub severe: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCounts {
    pub samples: usize,
    pub labels: LabelSummary,
    pub propagation: PropagationSummary,
}

/// `run_manifest.json`: the resolved configuration plus what it produced.
/// Passing this file back as `--config` replays the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub synthetic_seed: u64,
    pub config: PipelineConfig,
    pub counts: ManifestCounts,
    pub artifacts: Vec<String>,
}

pub struct Pipeline {
    pub config: PipelineConfig,
}

fn read_samples(dir: &Path) -> Result<Vec<PatientSample>> {
    read_samples_csv(open(dir, SAMPLES_FILE)?)
}

/// Reads class indices from `propagated_labels.csv`.
pub fn read_propagated_labels(reader: impl std::io::Read) -> Result<Vec<usize>> {
    let labels = read_labels_csv(reader)?;
    labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            l.class_index()
                .ok_or_else(|| Error::parse(PROPAGATED_FILE, format!("row {i} is unlabeled")))
        })
        .collect()
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> StageResult<Self> {
        config.validate().at(Stage::Config)?;
        Ok(Pipeline { config })
    }

    pub fn out_dir(&self) -> &Path {
        &self.config.output_dir
    }

    pub fn synth(&self) -> StageResult<usize> {
        let run = || -> Result<usize> {
            let samples = generate_synthetic_cohort(&self.config.synthetic_spec())?;
            write_artifact(self.out_dir(), SAMPLES_FILE, |w| write_samples_csv(w, &samples))?;
            Ok(samples.len())
        };
        run().at(Stage::Synth)
    }

    pub fn extract(&self) -> StageResult<usize> {
        let run = || -> Result<usize> {
            let dir = self
                .config
                .input
                .raw_dir
                .as_ref()
                .ok_or_else(|| Error::config("input.raw_dir", "required by the extract stage"))?;
            let tables = RawTables::from_dir(dir)?;
            let out = extract_samples(&tables, &self.config.extraction)?;
            write_artifact(self.out_dir(), SAMPLES_FILE, |w| write_samples_csv(w, &out.samples))?;
            Ok(out.samples.len())
        };
        run().at(Stage::Extract)
    }

    /// Copies a user-supplied `samples.csv` into the output directory after
    /// validating it.
    fn import_samples(&self) -> StageResult<usize> {
        let run = || -> Result<usize> {
            let path = self
                .config
                .input
                .samples
                .as_ref()
                .ok_or_else(|| Error::config("input.samples", "required"))?;
            let file = File::open(path).map_err(|e| {
                Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
            })?;
            let samples = read_samples_csv(BufReader::new(file))?;
            write_artifact(self.out_dir(), SAMPLES_FILE, |w| write_samples_csv(w, &samples))?;
            Ok(samples.len())
        };
        run().at(Stage::Extract)
    }

    /// Produces `samples.csv` from the configured source.
    pub fn acquire(&self) -> StageResult<usize> {
        match self.config.input.source {
            InputSource::Synthetic => self.synth(),
            InputSource::Mimic => self.extract(),
            InputSource::Samples => self.import_samples(),
        }
    }

    pub fn label(&self) -> StageResult<LabelSummary> {
        let run = || -> Result<LabelSummary> {
            let samples = read_samples(self.out_dir())?;
            let (labels, summary) = label_dataset(&samples, &self.config.ranges);
            write_artifact(self.out_dir(), LABELS_FILE, |w| write_labels_csv(w, &labels))?;
            log::info!(
                "label: {} mild, {} severe, {} unlabeled",
                summary.n_mild,
                summary.n_severe,
                summary.n_unlabeled
            );
            Ok(summary)
        };
        run().at(Stage::Label)
    }

    /// Runs both graph methods on features imputed and standardized over
    /// all samples, writes the configured method's labels and records how
    /// often the two agree on the initially unlabeled rows.
    pub fn propagate(&self) -> StageResult<PropagationSummary> {
        let run = || -> Result<PropagationSummary> {
            let dir = self.out_dir();
            let samples = read_samples(dir)?;
            let partial = read_labels_csv(open(dir, LABELS_FILE)?)?;
            if partial.len() != samples.len() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{} labels", samples.len()),
                    found: format!("{} labels", partial.len()),
                });
            }
            let x = encode_features(&samples)?;
            let z = Preprocessor::fit(&x)?.apply(&x)?;
            let graph = build_affinity(&z, &self.config.ssl)?;
            let prop = label_propagation_graph(&graph, &partial, &self.config.ssl)?;
            let spread = label_spreading_graph(&graph, &partial, &self.config.ssl)?;
            let agree = agreement(&prop.labels, &spread.labels, |i| partial[i] == SeverityLabel::Unlabeled);
            let chosen = match self.config.label_method {
                LabelMethod::Propagation => &prop,
                LabelMethod::Spreading => &spread,
            };
            let (mild, severe) = chosen.class_totals();
            let summary = PropagationSummary {
                method: self.config.label_method,
                propagation_iterations: prop.iterations,
                propagation_converged: prop.converged,
                spreading_iterations: spread.iterations,
                spreading_converged: spread.converged,
                agreement_on_unlabeled: agree,
                mild,
                severe,
            };
            if !prop.converged || !spread.converged {
                log::warn!("propagate: an iteration limit was reached before convergence");
            }
            log::info!("propagate: {mild} mild, {severe} severe; methods agree on {:.2}% of unlabeled", 100.0 * agree);
            write_artifact(dir, PROPAGATED_FILE, |w| chosen.write_csv(w))?;
            write_artifact(dir, PROPAGATION_FILE, |w| {
                serde_json::to_writer_pretty(&mut *w, &summary)?;
                Ok(w.write_all(b"\n")?)
            })?;
            Ok(summary)
        };
        run().at(Stage::Propagate)
    }

    pub fn evaluate(&self) -> StageResult<Vec<MetricsReport>> {
        let run = || -> Result<Vec<MetricsReport>> {
            let dir = self.out_dir();
            let samples = read_samples(dir)?;
            let y = read_propagated_labels(open(dir, PROPAGATED_FILE)?)?;
            if y.len() != samples.len() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{} labels", samples.len()),
                    found: format!("{} labels", y.len()),
                });
            }
            let x = encode_features(&samples)?;
            let cv = self.config.cv();
            let mut reports = Vec::new();
            for spec in &self.config.classifiers {
                let start = Instant::now();
                let report = cross_validate(&x, &y, spec, &cv)?;
                log::info!(
                    "evaluate: {} accuracy {} ({:.1}s)",
                    report.classifier,
                    report.metrics.accuracy,
                    start.elapsed().as_secs_f64()
                );
                for w in &report.warnings {
                    log::warn!("{}: {w}", report.classifier);
                }
                for (fold, points) in report.roc.iter().enumerate() {
                    write_artifact(dir, &roc_file(&report.classifier, fold), |w| write_roc_csv(points, w))?;
                }
                let json = report.to_json()?;
                write_artifact(dir, &metrics_file(&report.classifier), |w| Ok(w.write_all(json.as_bytes())?))?;
                reports.push(report);
            }
            Ok(reports)
        };
        run().at(Stage::Evaluate)
    }

    /// Prints the metrics table, writes `report.txt` and `run_manifest.json`.
    pub fn report(&self) -> StageResult<RunManifest> {
        let run = || -> Result<RunManifest> {
            let dir = self.out_dir();
            let samples = read_samples(dir)?;
            let labels = read_labels_csv(open(dir, LABELS_FILE)?)?;
            let propagation: PropagationSummary = serde_json::from_reader(open(dir, PROPAGATION_FILE)?)?;
            let mut reports = Vec::new();
            for spec in &self.config.classifiers {
                let r: MetricsReport = serde_json::from_reader(open(dir, &metrics_file(spec.name()))?)?;
                reports.push(r);
            }
            let mut table = String::new();
            table.push_str(&MetricsReport::table_header());
            table.push('\n');
            for r in &reports {
                table.push_str(&r.table_row());
                table.push('\n');
            }
            print!("{table}");
            write_artifact(dir, REPORT_FILE, |w| Ok(w.write_all(table.as_bytes())?))?;

            let mut artifacts: Vec<String> = vec![
                SAMPLES_FILE.into(),
                LABELS_FILE.into(),
                PROPAGATED_FILE.into(),
                PROPAGATION_FILE.into(),
            ];
            for r in &reports {
                artifacts.push(metrics_file(&r.classifier));
                artifacts.extend((0..r.folds).map(|f| roc_file(&r.classifier, f)));
            }
            artifacts.push(REPORT_FILE.into());
            let manifest = RunManifest {
                format_version: MANIFEST_FORMAT_VERSION,
                tool: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                seed: self.config.seed,
                synthetic_seed: self.config.synthetic_spec().seed,
                config: self.config.clone(),
                counts: ManifestCounts {
                    samples: samples.len(),
                    labels: LabelSummary::from_labels(&labels),
                    propagation,
                },
                artifacts,
            };
            write_artifact(dir, MANIFEST_FILE, |w| {
                serde_json::to_writer_pretty(&mut *w, &manifest)?;
                Ok(w.write_all(b"\n")?)
            })?;
            Ok(manifest)
        };
        run().at(Stage::Report)
    }

    /// All stages in order.
    pub fn run(&self) -> StageResult<RunManifest> {
        let start = Instant::now();
        let n = self.acquire()?;
        log::info!("acquired {n} samples");
        self.label()?;
        self.propagate()?;
        self.evaluate()?;
        let manifest = self.report()?;
        log::info!("pipeline finished in {:.1}s", start.elapsed().as_secs_f64());
        Ok(manifest)
    }
}

/// Validates `config` and runs every stage.
pub fn run_pipeline(config: PipelineConfig) -> StageResult<RunManifest> {
    Pipeline::new(config)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{ClassifierSpec, ForestParams, KnnParams, SvmParams};

    fn small(dir: &Path) -> PipelineConfig {
        let mut cfg = PipelineConfig {
            output_dir: dir.to_path_buf(),
            ..Default::default()
        };
        cfg.synthetic.n_total = 300;
        cfg.classifiers = vec![
            ClassifierSpec::RandomForest(ForestParams { n_trees: 10, ..Default::default() }),
            ClassifierSpec::Knn(KnnParams { candidates: vec![1, 3, 5], ..Default::default() }),
            ClassifierSpec::Svm(SvmParams::default()),
        ];
        cfg
    }

    #[test]
    fn small_run_writes_every_artifact() {
        let tmp = tempfile::tempdir().unwrap();
        let manifest = run_pipeline(small(tmp.path())).unwrap();
        for a in &manifest.artifacts {
            assert!(tmp.path().join(a).is_file(), "{a}");
        }
        assert!(tmp.path().join(MANIFEST_FILE).is_file());
        assert_eq!(manifest.counts.samples, 300);
        assert_eq!(manifest.counts.labels.total(), 300);
        let leftovers: Vec<_> = fs::read_dir(tmp.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".partial"))
            .collect();
        assert!(leftovers.is_empty());
    }

    #[test]
    fn missing_input_names_the_stage() {
        let tmp = tempfile::tempdir().unwrap();
        let p = Pipeline::new(small(tmp.path())).unwrap();
        let err = p.label().unwrap_err();
        assert_eq!(err.stage, Stage::Label);
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().starts_with("label stage failed"));
    }

    #[test]
    fn config_errors_exit_with_two() {
        let cfg = PipelineConfig { cv_folds: 0, ..Default::default() };
        assert_eq!(Pipeline::new(cfg).err().unwrap().exit_code(), 2);
    }

    #[test]
    fn failed_writer_leaves_partial_file() {
        let tmp = tempfile::tempdir().unwrap();
        let r = write_artifact(tmp.path(), "x.csv", |w| {
            w.write_all(b"half")?;
            Err(Error::Numeric("boom".into()))
        });
        assert!(r.is_err());
        assert!(tmp.path().join("x.csv.partial").is_file());
        assert!(!tmp.path().join("x.csv").exists());
    }
}

//! Pipeline configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifiers::ClassifierSpec;
use crate::error::{Error, Result};
use crate::evaluation::{CvConfig, PreprocessMode};
use crate::ingestion::{ExtractionConfig, SyntheticSpec, TargetMix};
use crate::model::NormalRanges;
use crate::rng::stage_seed;
use crate::semi_supervised::AffinityConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    /// Seeded synthetic cohort.
    #[default]
    Synthetic,
    /// MIMIC-shaped raw tables in `raw_dir`.
    Mimic,
    /// An existing `samples.csv`.
    Samples,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub source: InputSource,
    pub raw_dir: Option<PathBuf>,
    pub samples: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSettings {
    pub n_total: usize,
    pub missing_rate: f64,
    pub target_mix: TargetMix,
}

impl Default for SyntheticSettings {
    fn default() -> Self {
        let spec = SyntheticSpec::default();
        SyntheticSettings {
            n_total: spec.n_total,
            missing_rate: spec.missing_rate,
            target_mix: spec.target_mix,
        }
    }
}

/// Which graph method supplies the final labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMethod {
    #[default]
    Propagation,
    Spreading,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub mode: PreprocessMode,
    pub cv_folds: usize,
    pub output_dir: PathBuf,
    pub label_method: LabelMethod,
    pub input: InputConfig,
    pub synthetic: SyntheticSettings,
    pub extraction: ExtractionConfig,
    pub ranges: NormalRanges,
    pub ssl: AffinityConfig,
    pub classifiers: Vec<ClassifierSpec>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            mode: PreprocessMode::LeakageSafe,
            cv_folds: 5,
            output_dir: PathBuf::from("out"),
            label_method: LabelMethod::Propagation,
            input: InputConfig::default(),
            synthetic: SyntheticSettings::default(),
            extraction: ExtractionConfig::default(),
            ranges: NormalRanges::default(),
            ssl: AffinityConfig::knn(7),
            classifiers: ClassifierSpec::defaults(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(s).map_err(|e| Error::config("config file", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config, or the `config` object of a `run_manifest.json`
    /// when the path ends in `.json`.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config("config file", format!("cannot read {}: {e}", path.display()))
        })?;
        if path.extension().is_some_and(|e| e == "json") {
            let doc: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::config("manifest", e.to_string()))?;
            let cfg = doc
                .get("config")
                .ok_or_else(|| Error::config("manifest", "no config object"))?;
            let cfg: PipelineConfig =
                serde_json::from_value(cfg.clone()).map_err(|e| Error::config("manifest", e.to_string()))?;
            cfg.validate()?;
            Ok(cfg)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config("config file", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.cv_folds < 2 {
            return Err(Error::config("cv_folds", "must be at least 2"));
        }
        match self.input.source {
            InputSource::Mimic if self.input.raw_dir.is_none() => {
                return Err(Error::config("input.raw_dir", "required when input.source = \"mimic\""));
            }
            InputSource::Samples if self.input.samples.is_none() => {
                return Err(Error::config("input.samples", "required when input.source = \"samples\""));
            }
            _ => {}
        }
        if self.classifiers.is_empty() {
            return Err(Error::config("classifiers", "at least one classifier is required"));
        }
        let mut names: Vec<&str> = self.classifiers.iter().map(|c| c.name()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("classifiers", "each kind may appear once"));
        }
        for c in &self.classifiers {
            c.validate()?;
        }
        self.ranges.validate()?;
        self.ssl.validate()?;
        self.synthetic_spec().validate()
    }

    /// Replaces the run seed and every classifier seed.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        for c in &mut self.classifiers {
            if let ClassifierSpec::RandomForest(p) = c {
                p.seed = seed;
            }
        }
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            n_total: self.synthetic.n_total,
            target_mix: self.synthetic.target_mix,
            missing_rate: self.synthetic.missing_rate,
            seed: stage_seed(self.seed, "synth"),
            ranges: self.ranges,
        }
    }

    pub fn cv(&self) -> CvConfig {
        CvConfig {
            folds: self.cv_folds,
            seed: self.seed,
            mode: self.mode,
        }
    }
}

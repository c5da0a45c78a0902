//! # copd-severity
//!
//! Severity classification of COPD samples from ICU blood-gas and vital-sign
//! measurements:
//!
//! 1. build a wide sample table from MIMIC-shaped CSV tables, or generate a
//!    seeded synthetic cohort ([`ingestion`]);
//! 2. label samples with blood-gas normal-range rules ([`labeling`]);
//! 3. complete the unlabeled remainder with label propagation or label
//!    spreading ([`semi_supervised`]);
//! 4. impute, standardize ([`preprocessing`]) and evaluate a random forest,
//!    k-nearest neighbors and an RBF support vector machine ([`classifiers`])
//!    under stratified k-fold cross-validation ([`evaluation`]).
//!
//! [`pipeline`] wires the stages together and writes the report artifacts.
//! Every capability has a runnable program under `examples/`:
//!
//! ```bash
//! cargo run --release --example full_pipeline
//! ```

pub mod classifiers;
pub mod error;
pub mod evaluation;
pub mod ingestion;
pub mod labeling;
pub mod matrix;
pub mod model;
pub mod pipeline;
pub mod preprocessing;
pub mod rng;
pub mod semi_supervised;

pub use error::{Error, ErrorKind, Result};
pub use matrix::Matrix;
pub use model::{
    encode_features, FeatureMatrix, Gender, Interval, Measurement, NormalRanges, PatientSample, SeverityLabel,
    FEATURE_COLUMNS,
};

//! Builds the wide sample table from MIMIC-shaped CSV tables.
//!
//! ```bash
//! cargo run --example extract_mimic_tables -- path/to/raw_dir
//! ```
//! Without an argument the small fixture under `tests/fixtures/mimic` is used.

use std::path::PathBuf;

use copd_severity::ingestion::{extract_samples, write_samples_csv, ExtractionConfig, RawTables};

fn main() -> copd_severity::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mimic"));
    let tables = RawTables::from_dir(&dir)?;
    let out = extract_samples(&tables, &ExtractionConfig::default())?;
    eprintln!("{} samples from {}", out.samples.len(), dir.display());
    eprintln!("{:?}", out.warnings);
    write_samples_csv(std::io::stdout(), &out.samples)
}

//! Generates a small synthetic cohort and prints its rule-label mix.

use copd_severity::ingestion::{generate_synthetic_cohort, write_samples_csv, SyntheticSpec};
use copd_severity::labeling::label_dataset;
use copd_severity::NormalRanges;

fn main() -> copd_severity::Result<()> {
    let spec = SyntheticSpec {
        n_total: 2000,
        seed: 7,
        ..SyntheticSpec::default()
    };
    let samples = generate_synthetic_cohort(&spec)?;
    let (_, summary) = label_dataset(&samples, &NormalRanges::default());
    println!(
        "{} samples: {} mild-to-moderate, {} severe, {} unlabeled",
        summary.total(),
        summary.n_mild,
        summary.n_severe,
        summary.n_unlabeled
    );
    println!("first rows:");
    write_samples_csv(std::io::stdout(), &samples[..3])?;
    Ok(())
}

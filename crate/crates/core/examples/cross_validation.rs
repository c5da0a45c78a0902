//! Cross-validates all three classifiers on a labeled synthetic cohort and
//! writes the first fold's ROC curve for the forest.

use copd_severity::classifiers::ClassifierSpec;
use copd_severity::evaluation::{cross_validate, write_roc_csv, CvConfig, MetricsReport};
use copd_severity::ingestion::{generate_synthetic_cohort, SyntheticSpec};
use copd_severity::labeling::label_dataset;
use copd_severity::{encode_features, NormalRanges};

fn main() -> copd_severity::Result<()> {
    let spec = SyntheticSpec {
        n_total: 2500,
        ..SyntheticSpec::default()
    };
    let samples = generate_synthetic_cohort(&spec)?;
    let (labels, _) = label_dataset(&samples, &NormalRanges::default());
    let keep: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_labeled()).collect();
    let x = encode_features(&samples)?.select_rows(&keep);
    let y: Vec<usize> = keep.iter().map(|&i| labels[i].class_index().unwrap()).collect();

    println!("{}", MetricsReport::table_header());
    let cfg = CvConfig::default();
    for spec in ClassifierSpec::defaults() {
        let report = cross_validate(&x, &y, &spec, &cfg)?;
        println!("{}", report.table_row());
        if spec.name() == "random_forest" {
            let path = std::env::temp_dir().join("roc_random_forest_fold0.csv");
            write_roc_csv(&report.roc[0], std::fs::File::create(&path)?)?;
            eprintln!("ROC written to {}", path.display());
        }
    }
    Ok(())
}

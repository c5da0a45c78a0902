//! Completes the unlabeled part of a synthetic cohort with label propagation
//! and label spreading on a knn graph, and compares the two.

use copd_severity::ingestion::{generate_synthetic_cohort, SyntheticSpec};
use copd_severity::labeling::label_dataset;
use copd_severity::preprocessing::Preprocessor;
use copd_severity::semi_supervised::{
    agreement, build_affinity, label_propagation_graph, label_spreading_graph, AffinityConfig,
};
use copd_severity::{encode_features, NormalRanges, SeverityLabel};

fn main() -> copd_severity::Result<()> {
    let spec = SyntheticSpec {
        n_total: 3000,
        ..SyntheticSpec::default()
    };
    let samples = generate_synthetic_cohort(&spec)?;
    let (partial, summary) = label_dataset(&samples, &NormalRanges::default());
    let x = Preprocessor::fit(&encode_features(&samples)?)?.apply(&encode_features(&samples)?)?;

    let cfg = AffinityConfig::knn(7);
    let graph = build_affinity(&x, &cfg)?;
    let prop = label_propagation_graph(&graph, &partial, &cfg)?;
    let spread = label_spreading_graph(&graph, &partial, &cfg)?;

    println!("rule labels: {} mild, {} severe, {} unlabeled", summary.n_mild, summary.n_severe, summary.n_unlabeled);
    for (name, r) in [("propagation", &prop), ("spreading", &spread)] {
        let (m, s) = r.class_totals();
        println!("{name:<12} {m} mild, {s} severe ({} iterations, converged {})", r.iterations, r.converged);
    }
    let a = agreement(&prop.labels, &spread.labels, |i| partial[i] == SeverityLabel::Unlabeled);
    println!("agreement on unlabeled rows: {:.2}%", 100.0 * a);
    Ok(())
}

//! Chooses k for the nearest-neighbor classifier by stratified CV.

use copd_severity::classifiers::knn::default_candidates;
use copd_severity::classifiers::select_k;
use copd_severity::evaluation::PreprocessMode;
use copd_severity::rng::stream_rng;
use copd_severity::{FeatureMatrix, Matrix};
use rand_distr::{Distribution, Normal};

fn main() -> copd_severity::Result<()> {
    let mut rng = stream_rng(3, 0);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..600 {
        let c = i % 2;
        rows.push([noise.sample(&mut rng) + 1.5 * c as f64, noise.sample(&mut rng)]);
        y.push(c);
    }
    let x = FeatureMatrix::dense(vec!["u".into(), "v".into()], Matrix::from_rows(&rows)?)?;
    let sel = select_k(&x, &y, &default_candidates(), 5, 42, PreprocessMode::LeakageSafe)?;
    for (k, acc) in &sel.scores {
        let mark = if *k == sel.k { " <" } else { "" };
        println!("k = {k:>2}  accuracy {acc:.4}{mark}");
    }
    Ok(())
}

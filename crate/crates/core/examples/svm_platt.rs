//! Trains the RBF support vector machine and shows calibrated probabilities
//! along a line through both classes.

use copd_severity::classifiers::{svm_decision, train_svm_smo, SvmParams};
use copd_severity::rng::stream_rng;
use copd_severity::Matrix;
use rand_distr::{Distribution, Normal};

fn main() -> copd_severity::Result<()> {
    let mut rng = stream_rng(11, 0);
    let noise = Normal::new(0.0, 0.8).unwrap();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..300 {
        let s = if i % 2 == 0 { 1.0 } else { -1.0 };
        rows.push([s + noise.sample(&mut rng), noise.sample(&mut rng)]);
        y.push(s);
    }
    let x = Matrix::from_rows(&rows)?;
    let model = train_svm_smo(&x, &y, &SvmParams::default())?;
    println!(
        "{} support vectors, objective {:.4}, {} iterations, converged {}",
        model.support_vectors.rows(),
        model.objective,
        model.iterations,
        model.converged
    );
    if let Some(p) = model.platt {
        println!("sigmoid a = {:.4}, b = {:.4}", p.a, p.b);
    }
    let probe: Vec<[f64; 2]> = (-4..=4).map(|i| [i as f64 * 0.5, 0.0]).collect();
    let probe = Matrix::from_rows(&probe)?;
    for (row, d) in probe.row_iter().zip(svm_decision(&model, &probe)) {
        println!("x = {:>5.1}  decision {d:>7.3}  p(+1) {:.3}", row[0], model.probability(d));
    }
    Ok(())
}

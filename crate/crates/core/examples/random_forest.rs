//! Trains a random forest on a noisy two-feature problem and reports
//! in-sample and held-out accuracy.

use copd_severity::classifiers::{train_random_forest, ForestParams};
use copd_severity::rng::stream_rng;
use copd_severity::Matrix;
use rand::Rng;

fn make(n: usize, seed: u64) -> (Matrix, Vec<usize>) {
    let mut rng = stream_rng(seed, 0);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let (a, b): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let noisy = rng.random_bool(0.05);
        y.push(usize::from((a * a + b * b < 1.5) != noisy));
        rows.push([a, b]);
    }
    (Matrix::from_rows(&rows).unwrap(), y)
}

fn accuracy(p: &[[f64; 2]], y: &[usize]) -> f64 {
    p.iter().zip(y).filter(|(p, &t)| usize::from(p[1] > 0.5) == t).count() as f64 / y.len() as f64
}

fn main() -> copd_severity::Result<()> {
    let (x, y) = make(800, 1);
    let (xt, yt) = make(400, 2);
    let forest = train_random_forest(&x, &y, &ForestParams::default())?;
    let depth = forest.trees.iter().map(|t| t.depth()).max().unwrap_or(0);
    println!("{} trees, deepest {depth}", forest.trees.len());
    println!("train accuracy {:.3}", accuracy(&forest.predict_proba(&x), &y));
    println!("test accuracy  {:.3}", accuracy(&forest.predict_proba(&xt), &yt));
    Ok(())
}

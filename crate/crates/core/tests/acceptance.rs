//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line per criterion and exits non-zero if any fails. Built without the
//! libtest harness so the timings are not disturbed by parallel tests.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use copd_severity::classifiers::{svm_decision, train_svm_smo, ClassifierSpec, ForestParams, KnnParams, SvmParams};
use copd_severity::evaluation::{cross_validate, roc_auc, roc_curve, stratified_kfold, trapezoid_auc, CvConfig};
use copd_severity::ingestion::{generate_synthetic_cohort, PUBLISHED_LABEL_COUNTS};
use copd_severity::labeling::{classify_severity, label_dataset};
use copd_severity::matrix::{squared_distance, Matrix};
use copd_severity::model::{encode_features, FeatureMatrix, Gender, Measurement, NormalRanges, PatientSample, SeverityLabel};
use copd_severity::pipeline::{metrics_file, run_pipeline, PipelineConfig, RunManifest, MANIFEST_FILE, PROPAGATED_FILE};
use copd_severity::preprocessing::Preprocessor;
use copd_severity::rng::stream_rng;
use copd_severity::semi_supervised::{
    agreement, build_affinity, closed_form_spreading, default_gamma, label_of, label_propagation_graph,
    label_spreading_graph, normalize_rows, Affinity, AffinityConfig,
};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- 1

/// Algorithm 1 written as a table over the five inside flags.
fn rule_oracle(ph: bool, po2: bool, pco2: bool, be: bool, tco2: bool) -> SeverityLabel {
    let companions_in = [pco2, tco2, be].iter().filter(|&&f| f).count();
    let all_in = ph && po2 && pco2 && be && tco2;
    let all_out = !(ph || po2 || pco2 || be || tco2);
    match (ph, all_in, all_out) {
        (_, true, _) => SeverityLabel::MildToModerate,
        (true, _, _) if companions_in > 0 => SeverityLabel::MildToModerate,
        (_, _, true) => SeverityLabel::Severe,
        (false, _, _) if companions_in < 3 => SeverityLabel::Severe,
        _ => SeverityLabel::Unlabeled,
    }
}

fn blank_sample() -> PatientSample {
    let t = NaiveDate::from_ymd_opt(2150, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    PatientSample::empty(1, 1, t, 65.0, Gender::Female)
}

fn labeler_truth_table() -> Check {
    let ranges = NormalRanges::default();
    let params = [Measurement::Ph, Measurement::Po2, Measurement::Pco2, Measurement::Be, Measurement::Tco2];
    let mut checked = 0;
    for above in [true, false] {
        for mask in 0u32..32 {
            let inside: Vec<bool> = (0..5).map(|b| mask & (1 << b) != 0).collect();
            let mut s = blank_sample();
            for (p, &inn) in params.iter().zip(&inside) {
                let iv = ranges.get(*p).unwrap();
                let v = if inn {
                    0.5 * (iv.lo + iv.hi)
                } else if above {
                    iv.hi + iv.width()
                } else {
                    iv.lo - iv.width()
                };
                s.set(*p, Some(v));
            }
            let got = classify_severity(&s, &ranges);
            let want = rule_oracle(inside[0], inside[1], inside[2], inside[3], inside[4]);
            ensure(got == want, || format!("mask {mask:05b} (outside values {}): got {got}, oracle {want}", if above { "high" } else { "low" }))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} cells (32 combinations x 2 outside sides) match the oracle"))
}

// ---------------------------------------------------------------- 2

fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> Affinity {
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.5) {
                let v = rng.random_range(0.05..1.0);
                w.set(i, j, v);
                w.set(j, i, v);
            }
        }
    }
    Affinity::from_dense(&w).unwrap()
}

fn random_partial(rng: &mut ChaCha8Rng, n: usize) -> Vec<SeverityLabel> {
    let mut labels: Vec<SeverityLabel> = (0..n)
        .map(|_| match rng.random_range(0..10) {
            0..=1 => SeverityLabel::MildToModerate,
            2..=3 => SeverityLabel::Severe,
            _ => SeverityLabel::Unlabeled,
        })
        .collect();
    labels[0] = SeverityLabel::MildToModerate;
    labels[n - 1] = SeverityLabel::Severe;
    labels
}

fn spreading_oracle() -> Check {
    let mut rng = stream_rng(2024, 0);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let n = rng.random_range(2..=50);
        let alpha = [0.1, 0.2, 0.5][case % 3];
        let w = random_graph(&mut rng, n);
        let partial = random_partial(&mut rng, n);
        let cfg = AffinityConfig {
            alpha,
            tol: 1e-13,
            max_iter: 100_000,
            ..AffinityConfig::default()
        };
        let it = label_spreading_graph(&w, &partial, &cfg).map_err(|e| e.to_string())?;
        let y: Vec<[f64; 2]> = partial
            .iter()
            .map(|l| match l.class_index() {
                Some(0) => [1.0, 0.0],
                Some(_) => [0.0, 1.0],
                None => [0.0, 0.0],
            })
            .collect();
        let exact = normalize_rows(&closed_form_spreading(&w, &y, alpha).map_err(|e| e.to_string())?);
        for i in 0..n {
            let gap = (it.class_distributions[i][0] - exact[i][0])
                .abs()
                .max((it.class_distributions[i][1] - exact[i][1]).abs());
            worst = worst.max(gap);
            ensure(it.labels[i] == label_of(exact[i]), || format!("case {case} node {i}: argmax differs"))?;
        }
        ensure(worst < 1e-6, || format!("case {case}: value gap {worst:e}"))?;
    }
    Ok(format!("100 graphs, argmax agreement 100%, max gap {worst:.1e}"))
}

// ---------------------------------------------------------------- 3

fn propagation_agreement() -> Check {
    let cfg = PipelineConfig::default();
    let samples = generate_synthetic_cohort(&cfg.synthetic_spec()).map_err(|e| e.to_string())?;
    let (partial, _) = label_dataset(&samples, &cfg.ranges);
    let x = encode_features(&samples).map_err(|e| e.to_string())?;
    let z = Preprocessor::fit(&x).and_then(|p| p.apply(&x)).map_err(|e| e.to_string())?;
    let graph = build_affinity(&z, &cfg.ssl).map_err(|e| e.to_string())?;
    let prop = label_propagation_graph(&graph, &partial, &cfg.ssl).map_err(|e| e.to_string())?;
    let spread = label_spreading_graph(&graph, &partial, &cfg.ssl).map_err(|e| e.to_string())?;
    let unl = partial.iter().filter(|l| **l == SeverityLabel::Unlabeled).count();
    let a = agreement(&prop.labels, &spread.labels, |i| partial[i] == SeverityLabel::Unlabeled);
    ensure(a >= 0.95, || format!("agreement {:.4} on {unl} unlabeled samples", a))?;
    Ok(format!("agreement {:.2}% on {unl} initially unlabeled samples", 100.0 * a))
}

// ---------------------------------------------------------------- 4

fn brute_force_auc(scores: &[f64], y: &[usize]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &yi) in y.iter().enumerate() {
        for (j, &yj) in y.iter().enumerate() {
            if yi == 1 && yj == 0 {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

fn auc_oracle() -> Check {
    let mut rng = stream_rng(77, 0);
    let (mut worst_auc, mut worst_trap) = (0.0f64, 0.0f64);
    for case in 0..100 {
        let n = rng.random_range(2..=200);
        let mut y: Vec<usize> = (0..n).map(|_| usize::from(rng.random_bool(0.4))).collect();
        y[0] = 0;
        y[n - 1] = 1;
        // coarse scores so that ties occur
        let scale = [4.0, 20.0, 100.0, 1e6][case % 4];
        let scores: Vec<f64> = y
            .iter()
            .map(|&c| ((rng.random::<f64>() + 0.3 * c as f64) * scale).round() / scale)
            .collect();
        let auc = roc_auc(&scores, &y).map_err(|e| e.to_string())?;
        let trap = trapezoid_auc(&roc_curve(&scores, &y).map_err(|e| e.to_string())?);
        worst_auc = worst_auc.max((auc - brute_force_auc(&scores, &y)).abs());
        worst_trap = worst_trap.max((trap - auc).abs());
        ensure(worst_auc <= 1e-12 && worst_trap <= 1e-9, || {
            format!("case {case}: |auc - brute| = {worst_auc:e}, |trapezoid - auc| = {worst_trap:e}")
        })?;
    }
    Ok(format!("100 instances, max |auc - brute| {worst_auc:.1e}, max |trapezoid - auc| {worst_trap:.1e}"))
}

// ---------------------------------------------------------------- 5

fn stratified_folds() -> Check {
    let mut rng = stream_rng(5, 0);
    let k = 5;
    for case in 0..100 {
        let n = rng.random_range(10..=500);
        let p = rng.random_range(0.1..0.9);
        let y: Vec<usize> = loop {
            let y: Vec<usize> = (0..n).map(|_| usize::from(rng.random_bool(p))).collect();
            let ones = y.iter().sum::<usize>();
            if ones >= 2 && n - ones >= 2 {
                break y;
            }
        };
        let a = stratified_kfold(&y, k, case as u64).map_err(|e| e.to_string())?;
        ensure(a.fold_of.len() == n && a.fold_of.iter().all(|&f| f < k), || format!("case {case}: not a partition"))?;
        for class in 0..2 {
            let n_c = y.iter().filter(|&&c| c == class).count();
            let exact = n_c as f64 / k as f64;
            for f in 0..k {
                let c = (0..n).filter(|&i| y[i] == class && a.fold_of[i] == f).count();
                ensure((c as f64 - exact).abs() <= 1.0, || {
                    format!("case {case}: class {class} fold {f} has {c}, proportional share {exact:.2}")
                })?;
            }
        }
    }
    Ok("100 label vectors, every per-class fold count within 1 of n_c/5".into())
}

// ---------------------------------------------------------------- 6

fn separable_blobs() -> Check {
    let mut rng = stream_rng(6, 0);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..1000 {
        let c = i % 2;
        rows.push(vec![normal.sample(&mut rng) + 4.0 * c as f64, normal.sample(&mut rng)]);
        y.push(c);
    }
    let x = FeatureMatrix::dense(vec!["a".into(), "b".into()], Matrix::from_rows(&rows).unwrap()).unwrap();
    let mut parts = Vec::new();
    let mut failed = false;
    for spec in [
        ClassifierSpec::RandomForest(ForestParams::default()),
        ClassifierSpec::Knn(KnnParams::default()),
        ClassifierSpec::Svm(SvmParams::default()),
    ] {
        let r = cross_validate(&x, &y, &spec, &CvConfig::default()).map_err(|e| e.to_string())?;
        let acc = r.metrics.accuracy.mean;
        failed |= acc < 0.95;
        match r.selected_k {
            Some(k) => parts.push(format!("{} {acc:.4} (k={k})", r.classifier)),
            None => parts.push(format!("{} {acc:.4}", r.classifier)),
        }
    }
    let detail = format!("CV accuracy: {}", parts.join(", "));
    if failed {
        Err(detail)
    } else {
        Ok(detail)
    }
}

// ---------------------------------------------------------------- 7

/// Projection onto `{0 <= a <= c, y.a = 0}` by bisection on the multiplier.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lam: f64| -> Vec<f64> { v.iter().zip(y).map(|(&vi, &yi)| (vi - lam * yi).clamp(0.0, c)).collect() };
    let g = |a: &[f64]| -> f64 { a.iter().zip(y).map(|(a, y)| a * y).sum() };
    let bound = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

fn dual_objective(q: &[Vec<f64>], a: &[f64]) -> f64 {
    let n = a.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += a[i] * a[j] * q[i][j];
        }
    }
    0.5 * quad - a.iter().sum::<f64>()
}

/// Accelerated projected gradient on the SVM dual.
fn reference_dual(x: &Matrix, y: &[f64], c: f64, gamma: f64) -> f64 {
    let n = x.rows();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| y[i] * y[j] * (-gamma * squared_distance(x.row(i), x.row(j))).exp()).collect())
        .collect();
    let step = 1.0 / n as f64;
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    for _ in 0..20_000 {
        let grad: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q[i][j] * z[j]).sum::<f64>() - 1.0).collect();
        let v: Vec<f64> = z.iter().zip(&grad).map(|(zi, gi)| zi - step * gi).collect();
        let next = project(&v, y, c);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = next.iter().zip(&a).map(|(n, o)| n + (t - 1.0) / t_next * (n - o)).collect();
        a = next;
        t = t_next;
    }
    dual_objective(&q, &a)
}

fn svm_correctness() -> Check {
    let mut rng = stream_rng(7, 0);
    let params = SvmParams::default();
    let mut worst = 0.0f64;
    for case in 0..20 {
        let n = rng.random_range(4..=20);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            rows.push([s * 1.5 + rng.random_range(-1.0..1.0), s * 1.5 + rng.random_range(-1.0..1.0)]);
            y.push(s);
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let model = train_svm_smo(&x, &y, &params).map_err(|e| e.to_string())?;
        let d = svm_decision(&model, &x);
        let correct = d.iter().zip(&y).filter(|(d, y)| **d * **y > 0.0).count();
        ensure(correct == n, || format!("case {case}: training accuracy {correct}/{n}"))?;
        // objective recomputed from the stored support vectors
        let m = model.support_vectors.rows();
        let mut quad = 0.0;
        for i in 0..m {
            for j in 0..m {
                let k = (-model.gamma * squared_distance(model.support_vectors.row(i), model.support_vectors.row(j))).exp();
                quad += model.dual_coef[i] * model.dual_coef[j] * k;
            }
        }
        let smo = 0.5 * quad - model.dual_coef.iter().map(|c| c.abs()).sum::<f64>();
        let reference = reference_dual(&x, &y, params.c, default_gamma(&x));
        worst = worst.max((smo - reference).abs());
        ensure(worst <= 1e-4, || format!("case {case}: smo {smo:.8}, reference {reference:.8}"))?;
    }
    Ok(format!("20 instances, training accuracy 1.0, max objective gap {worst:.1e}"))
}

// ---------------------------------------------------------------- 8-10

struct SharedRun {
    dir: tempfile::TempDir,
    elapsed: Duration,
    manifest: RunManifest,
}

static FIRST_RUN: OnceLock<Result<SharedRun, String>> = OnceLock::new();

fn default_run(dir: tempfile::TempDir) -> Result<SharedRun, String> {
    let cfg = PipelineConfig {
        output_dir: dir.path().to_path_buf(),
        ..PipelineConfig::default()
    };
    let start = Instant::now();
    let manifest = run_pipeline(cfg).map_err(|e| e.to_string())?;
    Ok(SharedRun {
        dir,
        elapsed: start.elapsed(),
        manifest,
    })
}

fn first_run() -> Result<&'static SharedRun, String> {
    FIRST_RUN
        .get_or_init(|| default_run(tempfile::tempdir().map_err(|e| e.to_string())?))
        .as_ref()
        .map_err(Clone::clone)
}

fn read_json(path: &Path) -> Result<serde_json::Value, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn end_to_end() -> Check {
    let run = first_run()?;
    let counts = &run.manifest.counts.labels;
    let got = [counts.n_mild, counts.n_severe, counts.n_unlabeled];
    let n = counts.total() as f64;
    let mut parts = Vec::new();
    for (name, (g, p)) in ["mild", "severe", "unlabeled"].iter().zip(got.iter().zip(PUBLISHED_LABEL_COUNTS)) {
        let (share, target) = (*g as f64 / n, p as f64 / 12131.0);
        let rel = (share - target).abs() / target;
        ensure(rel <= 0.02, || format!("{name}: {g} ({share:.4}) vs paper {p} ({target:.4})"))?;
        parts.push(format!("{name} {g}/{p}"));
    }
    let rf = read_json(&run.dir.path().join(metrics_file("random_forest")))?;
    let acc = rf["metrics"]["accuracy"]["mean"].as_f64().ok_or("no accuracy")?;
    ensure(acc >= 0.90, || format!("random forest CV accuracy {acc:.4}"))?;
    ensure(run.elapsed < Duration::from_secs(120), || format!("pipeline took {:.1}s", run.elapsed.as_secs_f64()))?;
    Ok(format!(
        "labels {}; RF CV accuracy {acc:.4}; pipeline {:.1}s",
        parts.join(", "),
        run.elapsed.as_secs_f64()
    ))
}

fn determinism() -> Check {
    let a = first_run()?;
    let b = default_run(tempfile::tempdir().map_err(|e| e.to_string())?)?;
    let mut files: Vec<String> = a
        .manifest
        .config
        .classifiers
        .iter()
        .map(|c| metrics_file(c.name()))
        .collect();
    files.push(PROPAGATED_FILE.into());
    for f in &files {
        let (x, y): (PathBuf, PathBuf) = (a.dir.path().join(f), b.dir.path().join(f));
        let (x, y) = (fs::read(&x).map_err(|e| e.to_string())?, fs::read(&y).map_err(|e| e.to_string())?);
        ensure(x == y, || format!("{f} differs between runs"))?;
    }
    Ok(format!("{} files byte-identical across two runs", files.len()))
}

fn config_fidelity() -> Check {
    let run = first_run()?;
    let m = read_json(&run.dir.path().join(MANIFEST_FILE))?;
    let classifiers = m["config"]["classifiers"].as_array().ok_or("no classifiers")?;
    let find = |kind: &str| classifiers.iter().find(|c| c["kind"] == kind).cloned().ok_or(format!("no {kind}"));
    let rf = find("random_forest")?;
    ensure(rf["n_trees"] == 100 && rf["max_depth"] == 10 && rf["seed"] == 42, || format!("random forest spec {rf}"))?;
    let knn = find("knn")?;
    let odd: Vec<serde_json::Value> = (1..=29).step_by(2).map(|k| serde_json::json!(k)).collect();
    ensure(knn["candidates"].as_array() == Some(&odd), || format!("knn candidates {}", knn["candidates"]))?;
    ensure(m["config"]["cv_folds"] == 5, || format!("cv_folds {}", m["config"]["cv_folds"]))?;
    for c in classifiers {
        let kind = c["kind"].as_str().unwrap_or("?");
        let metrics = read_json(&run.dir.path().join(metrics_file(kind)))?;
        ensure(metrics["folds"] == 5 && metrics["seed"] == 42, || format!("{kind} metrics folds/seed"))?;
    }
    Ok("RF (100 trees, depth 10, seed 42), KNN candidates 1,3,..,29, 5 folds".into())
}

fn main() {
    let criteria: [(u32, &str, u64, fn() -> Check); 10] = [
        (1, "labeler truth table", 1, labeler_truth_table),
        (2, "spreading vs closed form", 10, spreading_oracle),
        (3, "propagation/spreading agreement", 300, propagation_agreement),
        (4, "ROC AUC vs pairwise brute force", 5, auc_oracle),
        (5, "stratified fold proportionality", 1, stratified_folds),
        (6, "separable blobs", 120, separable_blobs),
        (7, "SVM correctness", 30, svm_correctness),
        (8, "end-to-end synthetic run", 300, end_to_end),
        (9, "determinism", 300, determinism),
        (10, "config fidelity", 300, config_fidelity),
    ];
    let mut failures = 0;
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let outcome = match outcome {
            Ok(d) if secs > limit as f64 => Err(format!("{d}; over the {limit}s limit")),
            other => other,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        failures += usize::from(outcome.is_err());
        println!("{tag} [{id:>2}] {name}: {detail} ({secs:.2}s)");
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}

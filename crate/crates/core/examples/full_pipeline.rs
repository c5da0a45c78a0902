//! Runs every stage on the default synthetic cohort and lists the artifacts.
//!
//! ```bash
//! cargo run --release --example full_pipeline -- out_dir
//! ```

use copd_severity::pipeline::{run_pipeline, PipelineConfig};

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "out".into());
    let config = PipelineConfig {
        output_dir: out.into(),
        ..PipelineConfig::default()
    };
    match run_pipeline(config) {
        Ok(manifest) => {
            let l = &manifest.counts.labels;
            println!("labels: {} mild, {} severe, {} unlabeled", l.n_mild, l.n_severe, l.n_unlabeled);
            for a in &manifest.artifacts {
                println!("wrote {a}");
            }
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}

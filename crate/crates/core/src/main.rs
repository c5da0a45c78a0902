use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use copd_severity::evaluation::PreprocessMode;
use copd_severity::pipeline::{Pipeline, PipelineConfig, StageError};

#[derive(Parser)]
#[command(version, about = "COPD severity labeling and classification pipeline")]
struct Cli {
    /// TOML config file, or a run_manifest.json to replay.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed; also replaces the random forest seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// leakage_safe or paper_faithful.
    #[arg(long, global = true)]
    mode: Option<PreprocessMode>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build samples.csv from MIMIC-shaped tables in input.raw_dir.
    Extract,
    /// Generate a synthetic samples.csv.
    Synth,
    /// Apply the blood-gas rules, writing labels.csv.
    Label,
    /// Complete the labels by graph propagation.
    Propagate,
    /// Cross-validate every configured classifier.
    Evaluate,
    /// Print the metrics table and write run_manifest.json.
    Report,
    /// All stages in order.
    Run,
}

fn load(cli: &Cli) -> Result<Pipeline, StageError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_path(path).map_err(|source| StageError {
            stage: copd_severity::pipeline::Stage::Config,
            source,
        })?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    if let Some(mode) = cli.mode {
        cfg.mode = mode;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Pipeline::new(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = load(&cli).and_then(|p| match cli.command {
        Command::Extract => p.extract().map(drop),
        Command::Synth => p.synth().map(drop),
        Command::Label => p.label().map(drop),
        Command::Propagate => p.propagate().map(drop),
        Command::Evaluate => p.evaluate().map(drop),
        Command::Report => p.report().map(drop),
        Command::Run => p.run().map(drop),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Prints the default pipeline configuration as TOML.

fn main() -> copd_severity::Result<()> {
    print!("{}", copd_severity::pipeline::PipelineConfig::default().to_toml_string()?);
    Ok(())
}

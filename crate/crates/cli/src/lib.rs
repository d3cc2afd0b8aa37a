//! Experiment front end for `opsin-evo-core`: named protocols, reproducible
//! configs and machine-readable outputs.
//!
//! The binary exposes three subcommands — `run` (execute a named experiment
//! from a config file), `synth` (write a synthetic scene to the cube
//! container) and `score` (camouflage-score a scene under a bank). This
//! library holds everything those commands do, so tests and other tools can
//! drive experiments directly.

pub mod config;
pub mod defaults;
pub mod experiments;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Result;

use crate::config::ResolvedConfig;
use crate::experiments::RunSummary;

/// Runs an experiment end to end: execute every condition, then write
/// `trajectory.csv` per condition, `summary.json` and
/// `resolved_config.json` under `out_dir`.
pub fn run_and_emit(config: &ResolvedConfig, out_dir: &Path, threads: usize) -> Result<RunSummary> {
    let start = Instant::now();
    let output = experiments::run_experiment(config, threads)?;
    output::emit_outputs(&output, out_dir, start.elapsed().as_secs_f64())
}

/// Output directory precedence: `--out`, then the config, then
/// `runs/<experiment>`.
pub fn resolve_out_dir(config: &ResolvedConfig, cli_out: Option<PathBuf>) -> PathBuf {
    cli_out
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| Path::new("runs").join(config.name.as_str()))
}

//! File outputs: `trajectory.csv` per condition, `summary.json` and the
//! `resolved_config.json` echo that reproduces the run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

use opsin_evo_core::evolution::TrajectoryRecord;

use crate::config::ResolvedConfig;
use crate::experiments::{ConditionSummary, ExperimentOutput, RunSummary};

/// Stable digest of the scientific content of a config. The output
/// directory is excluded: moving results must not change run identity.
pub fn config_hash(config: &ResolvedConfig) -> String {
    let mut hashed = config.clone();
    hashed.out_dir = None;
    let bytes = serde_json::to_vec(&hashed).expect("resolved config serialises");
    format!("sha256:{:x}", Sha256::digest(&bytes))
}

/// Renders trajectory rows: one line per (epoch, kernel). Shifts are
/// re-checked against the clamp before anything is written.
pub fn trajectory_csv(records: &[TrajectoryRecord], max_shift_nm: f64) -> Result<String> {
    let mut out = String::from("epoch,kernel,lambda_max_nm,applied_shift_nm,loss,miou\n");
    for record in records {
        if record.lambda_max.len() != record.applied_shift_nm.len() {
            bail!("record {} has inconsistent kernel counts", record.epoch);
        }
        for (kernel, (lambda, shift)) in record
            .lambda_max
            .iter()
            .zip(&record.applied_shift_nm)
            .enumerate()
        {
            if shift.abs() > max_shift_nm + 1e-12 {
                bail!(
                    "record {} kernel {kernel}: shift {shift} exceeds the {max_shift_nm} nm cap",
                    record.epoch
                );
            }
            writeln!(
                out,
                "{},{kernel},{lambda},{shift},{},{}",
                record.epoch, record.loss, record.miou
            )
            .expect("writing to a String");
        }
    }
    Ok(out)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Writes every run artifact under `dir` and returns the summary.
///
/// Single-condition experiments write `trajectory.csv` at the top level;
/// multi-condition ones write `<label>/trajectory.csv` per condition.
pub fn emit_outputs(
    output: &ExperimentOutput,
    dir: &Path,
    wall_clock_seconds: f64,
) -> Result<RunSummary> {
    let config = &output.config;
    let with_records: Vec<_> = output
        .conditions
        .iter()
        .filter(|c| !c.records.is_empty())
        .collect();
    let flat = with_records.len() == 1;

    let mut summaries = Vec::new();
    for condition in &output.conditions {
        let trajectory_file = if condition.records.is_empty() {
            None
        } else {
            let rel: PathBuf = if flat {
                "trajectory.csv".into()
            } else {
                Path::new(&condition.label).join("trajectory.csv")
            };
            let csv = trajectory_csv(&condition.records, config.evolution.max_shift_nm)?;
            write_file(&dir.join(&rel), csv.as_bytes())?;
            Some(rel.to_string_lossy().into_owned())
        };
        summaries.push(ConditionSummary {
            label: condition.label.clone(),
            final_lambda_max_nm: condition.final_bank.lambda_maxes(),
            final_miou: condition.final_miou,
            final_loss: condition.final_loss,
            s_r: condition.s_r,
            epochs: condition.records.len().saturating_sub(1),
            trajectory_file,
        });
    }

    let last = output
        .conditions
        .last()
        .ok_or_else(|| anyhow::anyhow!("experiment produced no conditions"))?;
    let summary = RunSummary {
        experiment: config.name.to_string(),
        config_hash: config_hash(config),
        wall_clock_seconds,
        final_bank: last.final_bank.kernels().to_vec(),
        final_miou: last.final_miou,
        conditions: summaries,
    };

    write_file(
        &dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    let mut echoed = config.clone();
    echoed.out_dir = Some(dir.to_path_buf());
    write_file(
        &dir.join("resolved_config.json"),
        serde_json::to_string_pretty(&echoed)?.as_bytes(),
    )?;
    Ok(summary)
}

//! Run directory layout: `config.toml`, `field_<n>.bin`, `iterates.jsonl`,
//! `run.json` and `iterates.csv`.

use crate::checks::RunArtifacts;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::picard::{IterateSummary, RunOutput, RunStatus};
use crate::table::FieldTable;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub status: RunStatus,
    pub iterations: usize,
    pub warnings: Vec<String>,
    pub iterates: Vec<IterateSummary>,
}

impl RunSummary {
    pub fn from_output(out: &RunOutput) -> Self {
        let converged = out.converged();
        let last = out.records.len();
        RunSummary {
            status: out.status,
            iterations: last,
            warnings: out.warnings.clone(),
            iterates: out.records.iter().map(|r| r.summary(converged && r.n == last)).collect(),
        }
    }
}

pub fn field_path(dir: &Path, n: usize) -> PathBuf {
    dir.join(format!("field_{n}.bin"))
}

/// Writes everything but the field tables, which the caller saves as each
/// iterate completes.
pub fn write_run(dir: &Path, config: &RunConfig, out: &RunOutput) -> Result<RunSummary> {
    fs::create_dir_all(dir)?;
    write_config(dir, config)?;
    for r in &out.records {
        let path = field_path(dir, r.n);
        if !path.exists() {
            r.field.save(&path)?;
        }
    }
    let summary = RunSummary::from_output(out);
    let mut jsonl = BufWriter::new(fs::File::create(dir.join("iterates.jsonl"))?);
    for s in &summary.iterates {
        serde_json::to_writer(&mut jsonl, s)?;
        jsonl.write_all(b"\n")?;
    }
    jsonl.flush()?;
    write_json(&dir.join("run.json"), &summary)?;
    let mut w = csv::Writer::from_path(dir.join("iterates.csv"))?;
    w.write_record([
        "n",
        "norm_w34",
        "norm_w1",
        "delta_norm",
        "contraction_ratio",
        "gradient_delta_norm",
        "gradient_ratio",
        "momentum_drift_bound",
        "truncation_impulse",
        "seconds",
    ])
    ?;
    for s in &summary.iterates {
        let opt = |v: Option<f64>| v.map(|r| format!("{r:e}")).unwrap_or_default();
        w.write_record([
            s.n.to_string(),
            format!("{:e}", s.norm_w34),
            format!("{:e}", s.norm_w1),
            format!("{:e}", s.delta_norm),
            opt(s.contraction_ratio),
            format!("{:e}", s.gradient_delta_norm),
            opt(s.gradient_ratio),
            format!("{:e}", s.diagnostics.momentum_drift_bound),
            format!("{:e}", s.diagnostics.truncation_impulse),
            format!("{:.3}", s.diagnostics.seconds),
        ])
        ?;
    }
    w.flush()?;
    Ok(summary)
}

pub fn write_config(dir: &Path, config: &RunConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), config.to_toml()?)?;
    Ok(())
}

/// Loads the configuration snapshot and every `field_<n>.bin` in sequence.
pub fn load_run(dir: &Path) -> Result<RunArtifacts> {
    let config = RunConfig::load(&dir.join("config.toml"))?;
    let mut fields = Vec::new();
    while field_path(dir, fields.len() + 1).exists() {
        fields.push(Arc::new(FieldTable::load(&field_path(dir, fields.len() + 1))?));
    }
    if fields.is_empty() {
        return Err(Error::Config(format!("{}: no field tables in run directory", dir.display())));
    }
    RunArtifacts::new(config, fields)
}

pub fn read_summary(dir: &Path) -> Result<RunSummary> {
    let text = fs::read_to_string(dir.join("run.json"))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

//! Report files: JSON per command, flat CSV of study cells, a one-row-per-
//! check summary, and a metadata side file for anything non-deterministic.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use stablelike::report::SCHEMA_VERSION;
use stablelike::CheckReport;

use crate::config::{Command, ExperimentConfig};
use crate::error::CliError;

/// Column order of the per-cell CSV.
pub const CELL_COLUMNS: [&str; 9] = ["study", "R", "t", "k", "f_id", "estimate", "stderr", "ratio", "pass"];

/// Column order of the summary CSV.
pub const SUMMARY_COLUMNS: [&str; 8] = [
    "check_name",
    "schema_version",
    "pass",
    "fitted_constant",
    "worst_ratio",
    "refinement_delta",
    "metrics",
    "cells",
];

#[derive(Debug, Serialize)]
pub struct CommandOutput {
    pub schema_version: u32,
    pub command: Command,
    pub config: ExperimentConfig,
    pub pass: bool,
    pub reports: Vec<CheckReport>,
}

impl CommandOutput {
    pub fn new(command: Command, config: ExperimentConfig, reports: Vec<CheckReport>) -> Self {
        let pass = reports.iter().all(|r| r.pass);
        Self {
            schema_version: SCHEMA_VERSION,
            command,
            config,
            pass,
            reports,
        }
    }
}

/// Shortest round-trip form, in exponent notation outside `[1e-4, 1e15)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn csv_err(path: &str, e: csv::Error) -> CliError {
    CliError::io(path, std::io::Error::other(e))
}

/// One row per study cell across `reports`.
pub fn cells_csv(reports: &[CheckReport]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CELL_COLUMNS).map_err(|e| csv_err("cells", e))?;
    for c in reports.iter().flat_map(|r| &r.cells) {
        w.write_record([
            c.study.clone(),
            opt(c.r),
            opt(c.t),
            c.k.map(|k| k.to_string()).unwrap_or_default(),
            c.f_id.clone(),
            num(c.estimate),
            opt(c.stderr),
            opt(c.ratio),
            c.pass.to_string(),
        ])
        .map_err(|e| csv_err("cells", e))?;
    }
    finish(w)
}

/// One row per check. Every report must carry the current schema version.
pub fn emit_summary(reports: &[CheckReport]) -> Result<String, CliError> {
    if let Some(r) = reports.iter().find(|r| r.schema_version != SCHEMA_VERSION) {
        return Err(CliError::Config(format!(
            "report `{}` has schema version {} (expected {SCHEMA_VERSION})",
            r.check_name, r.schema_version
        )));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_COLUMNS).map_err(|e| csv_err("summary", e))?;
    for r in reports {
        w.write_record([
            r.check_name.clone(),
            r.schema_version.to_string(),
            r.pass.to_string(),
            opt(r.fitted_constant),
            opt(r.worst_ratio),
            opt(r.refinement_delta),
            r.metrics.len().to_string(),
            r.cells.len().to_string(),
        ])
        .map_err(|e| csv_err("summary", e))?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, CliError> {
    let bytes = w.into_inner().map_err(|e| CliError::io("csv", std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| CliError::io("csv", std::io::Error::other(e)))
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path.display().to_string(), e))
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path.display().to_string(), e))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(stablelike::Error::from)?;
    s.push('\n');
    Ok(s)
}

/// Writes `<command>.json` and `<command>.csv` under `dir`.
pub fn write_command(dir: &Path, output: &CommandOutput) -> Result<Vec<PathBuf>, CliError> {
    let name = output.command.name();
    let json = dir.join(format!("{name}.json"));
    let csv = dir.join(format!("{name}.csv"));
    write_file(&json, to_json(output)?.as_bytes())?;
    write_file(&csv, cells_csv(&output.reports)?.as_bytes())?;
    Ok(vec![json, csv])
}

#[derive(Debug, Serialize)]
pub struct Meta {
    pub version: &'static str,
    pub command: Command,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub elapsed_seconds: f64,
    pub threads: usize,
    pub files: Vec<String>,
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use bmdl_core::FitResult;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Everything needed to rerun a command, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Vec<String>,
    pub inputs: Vec<String>,
    /// Hyperparameters, iteration budgets and other settings in effect.
    pub settings: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    /// Wall-clock seconds per stage.
    pub timings_seconds: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(inputs: &[PathBuf], settings: serde_json::Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: std::env::args().collect(),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            settings,
            seeds: BTreeMap::new(),
            timings_seconds: BTreeMap::new(),
        }
    }
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(CliError::io(path))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Internal(format!("{}: {e}", path.display()))
}

/// Plot data: `t,label,observed,linear_fit,linear_plus_seasonal_fit,regime`.
pub fn write_plot_csv(path: &Path, fit: &FitResult) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    w.write_record([
        "t",
        "label",
        "observed",
        "linear_fit",
        "linear_plus_seasonal_fit",
        "regime",
    ])
    .map_err(csv_error(path))?;
    for p in &fit.fitted {
        w.write_record([
            p.t.to_string(),
            p.label.clone().unwrap_or_default(),
            p.observed.to_string(),
            p.linear_fit.to_string(),
            p.linear_plus_seasonal_fit.to_string(),
            p.regime.to_string(),
        ])
        .map_err(csv_error(path))?;
    }
    w.flush().map_err(CliError::io(path))
}

pub fn csv_rows(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    w.write_record(header).map_err(csv_error(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_error(path))?;
    }
    w.flush().map_err(CliError::io(path))
}

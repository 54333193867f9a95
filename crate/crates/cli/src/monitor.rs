// SPDX-License-Identifier: MIT OR Apache-2.0

//! `monitor`: resumable online detection over an append-only CSV.

use std::path::{Path, PathBuf};
use std::time::Instant;

use bmdl_core::{
    monitor_resume, DetectionRule, Hyperparams, MonitorConfig, MonitorOutcome, MonitorState,
};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::input::{file_stem_for, read_series, select};
use crate::output::{create_dir, write_json, RunManifest};
use crate::ModelArgs;

#[derive(Debug, Args)]
pub struct MonitorArgs {
    /// CSV input; rows may be appended between runs.
    pub input: PathBuf,
    /// Series to monitor when the input holds several.
    #[arg(long)]
    pub series: Option<String>,
    /// First horizon at which detection is attempted.
    #[arg(long)]
    pub start: usize,
    /// Time the run length is measured from.
    #[arg(long)]
    pub reference: Option<usize>,
    /// State file; read if present and rewritten after the run.
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Iterations at the first horizon; later horizons scale with the prefix length.
    #[arg(long = "base-iters", default_value_t = MonitorConfig::DEFAULT_BASE_ITERATIONS)]
    pub base_iters: usize,
    /// Upper bound on the iterations of any horizon.
    #[arg(long, default_value_t = bmdl_core::SearchConfig::DEFAULT_ITERATIONS)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Only changepoints among the last W observations trigger detection.
    #[arg(long = "recent-window")]
    pub recent_window: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "bmdl-out")]
    pub out: PathBuf,
}

/// Settings a state file is only valid for.
#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct Fingerprint {
    series: String,
    period: usize,
    hyper: Hyperparams,
    config: MonitorConfig,
    reference: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StateFile {
    fingerprint: Fingerprint,
    /// Rows consumed so far and a hash of their values.
    rows_seen: usize,
    rows_hash: u64,
    state: MonitorState,
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    series: &'a str,
    rows: usize,
    start: usize,
    reference: Option<usize>,
    next_horizon: usize,
    outcome: &'a MonitorOutcome,
}

fn rows_hash(values: &[f64]) -> u64 {
    values
        .iter()
        .flat_map(|v| v.to_bits().to_le_bytes())
        .fold(0xcbf2_9ce4_8422_2325, |h, b| {
            (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
        })
}

fn load_state(
    path: &Path,
    fingerprint: &Fingerprint,
    values: &[f64],
) -> CliResult<Option<MonitorState>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let saved: StateFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: unreadable state file: {e}", path.display())))?;
    if &saved.fingerprint != fingerprint {
        return Err(CliError::Input(format!(
            "{}: state was written for different series or settings",
            path.display()
        )));
    }
    if saved.rows_seen > values.len() || rows_hash(&values[..saved.rows_seen]) != saved.rows_hash {
        return Err(CliError::Input(format!(
            "{}: input no longer begins with the {} rows recorded in the state file",
            path.display(),
            saved.rows_seen
        )));
    }
    Ok(Some(saved.state))
}

pub fn run(args: MonitorArgs) -> CliResult<()> {
    let started = Instant::now();
    let hyper = args.model.hyper()?;
    let named = select(
        read_series(&args.input, args.model.period)?,
        args.series.as_deref(),
    )?;
    let ts = &named.series;
    if ts.len() < args.start {
        return Err(CliError::Input(format!(
            "series {:?} has {} rows, fewer than --start {}",
            named.name,
            ts.len(),
            args.start
        )));
    }
    let mut config = MonitorConfig::new(args.start, args.seed);
    config.search.iterations = args.base_iters;
    config.iteration_cap = args.iters;
    if let Some(window) = args.recent_window {
        config.detection_rule = DetectionRule::RecentChangepoint { window };
    }
    config
        .validate(&hyper)
        .map_err(|e| CliError::Input(e.to_string()))?;

    let fingerprint = Fingerprint {
        series: named.name.clone(),
        period: args.model.period,
        hyper: hyper.clone(),
        config: config.clone(),
        reference: args.reference,
    };
    let state = match &args.state {
        Some(path) => load_state(path, &fingerprint, ts.values())?,
        None => None,
    }
    .unwrap_or_else(|| MonitorState::initial(&config));
    let resumed_from = state.next_horizon;

    let (outcome, state) = monitor_resume(ts, &hyper, &config, args.reference, state, |rec| {
        log::debug!(
            "horizon {}: best m={} bmdl={}",
            rec.horizon,
            rec.best.model.m(),
            rec.best.bmdl
        );
    })
    .map_err(|e| CliError::from_core(&named.name, e))?;

    if let Some(path) = &args.state {
        let saved = StateFile {
            fingerprint,
            rows_seen: ts.len(),
            rows_hash: rows_hash(ts.values()),
            state: state.clone(),
        };
        write_json(path, &saved)?;
    }

    let report = Report {
        series: &named.name,
        rows: ts.len(),
        start: args.start,
        reference: args.reference,
        next_horizon: state.next_horizon,
        outcome: &outcome,
    };
    create_dir(&args.out)?;
    write_json(
        &args
            .out
            .join(format!("{}.monitor.json", file_stem_for(&named.name))),
        &report,
    )?;
    let mut manifest = RunManifest::new(
        std::slice::from_ref(&args.input),
        json!({
            "command": "monitor",
            "hyperparams": hyper,
            "period": args.model.period,
            "monitor": config,
            "reference": args.reference,
            "state_file": args.state.as_ref().map(|p| p.display().to_string()),
            "resumed_from_horizon": resumed_from,
        }),
    );
    manifest.seeds.insert("chain".into(), args.seed);
    manifest
        .timings_seconds
        .insert("total".into(), started.elapsed().as_secs_f64());
    write_json(&args.out.join("manifest.json"), &manifest)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?
    );
    Ok(())
}

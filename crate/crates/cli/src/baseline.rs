// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;
use std::time::Instant;

use bmdl_core::baseline::shewhart_scan;
use bmdl_core::{benchmark_stats, BenchmarkStats, MonitorOutcome};
use clap::Args;
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::input::{file_stem_for, read_series, select};
use crate::output::{create_dir, write_json, RunManifest};

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// CSV input.
    pub input: PathBuf,
    /// Series to monitor when the input holds several.
    #[arg(long)]
    pub series: Option<String>,
    /// First horizon checked for alerts.
    #[arg(long)]
    pub start: usize,
    /// First time of the benchmark window.
    #[arg(long = "window-start", default_value_t = 1)]
    pub window_start: usize,
    /// Last time of the benchmark window [default: start - 1].
    #[arg(long = "window-end")]
    pub window_end: Option<usize>,
    /// Time the run length is measured from.
    #[arg(long)]
    pub reference: Option<usize>,
    #[arg(long, default_value_t = 12)]
    pub period: usize,
    /// Output directory.
    #[arg(long, default_value = "bmdl-out")]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    series: &'a str,
    benchmark: BenchmarkStats,
    outcome: MonitorOutcome,
    /// 1: one point beyond 4 sigma; 2: two of three beyond 3 sigma; 3: eight beyond 1 sigma.
    rule: Option<u8>,
}

pub fn run(args: BaselineArgs) -> CliResult<()> {
    let started = Instant::now();
    let named = select(
        read_series(&args.input, args.period)?,
        args.series.as_deref(),
    )?;
    let ts = &named.series;
    if args.start == 0 || ts.len() < args.start {
        return Err(CliError::Input(format!(
            "series {:?} has {} rows; --start {} must lie in 1..={}",
            named.name,
            ts.len(),
            args.start,
            ts.len()
        )));
    }
    let window = (
        args.window_start,
        args.window_end.unwrap_or(args.start.saturating_sub(1)),
    );
    let benchmark =
        benchmark_stats(ts.values(), window).map_err(|e| CliError::from_core(&named.name, e))?;
    let (outcome, rule) = shewhart_scan(ts, window, args.start, args.reference)
        .map_err(|e| CliError::from_core(&named.name, e))?;
    let report = Report {
        series: &named.name,
        benchmark,
        outcome,
        rule: rule.map(|r| r.id()),
    };

    create_dir(&args.out)?;
    write_json(
        &args
            .out
            .join(format!("{}.baseline.json", file_stem_for(&named.name))),
        &report,
    )?;
    let mut manifest = RunManifest::new(
        std::slice::from_ref(&args.input),
        json!({
            "command": "baseline",
            "start": args.start,
            "window": window,
            "reference": args.reference,
            "period": args.period,
        }),
    );
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

// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;
use std::time::Instant;

use bmdl_core::report::report_from_scored;
use bmdl_core::{mh_search, FitResult, SearchConfig};
use clap::Args;
use rayon::prelude::*;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::input::{file_stem_for, read_all};
use crate::output::{create_dir, write_json, write_plot_csv, RunManifest};
use crate::{thread_pool, ModelArgs};

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// CSV files (`value`, `date,value` or `date,s1,s2,...`).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Metropolis-Hastings iterations per series.
    #[arg(long, default_value_t = SearchConfig::DEFAULT_ITERATIONS)]
    pub iters: usize,
    /// Chain seed, shared by every series.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Series processed concurrently [default: available cores].
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "bmdl-out")]
    pub out: PathBuf,
}

pub fn run(args: DetectArgs) -> CliResult<()> {
    let started = Instant::now();
    let hyper = args.model.hyper()?;
    let series = read_all(&args.inputs, args.model.period)?;
    for s in &series {
        s.series
            .check_against(&hyper)
            .map_err(|e| CliError::from_core(&s.name, e))?;
    }
    let mut stems = std::collections::HashSet::new();
    for s in &series {
        if !stems.insert(file_stem_for(&s.name)) {
            return Err(CliError::Input(format!(
                "series {:?} maps to an output file name already in use",
                s.name
            )));
        }
    }
    let config = SearchConfig {
        iterations: args.iters,
        seed: args.seed,
        ..SearchConfig::default()
    };
    config
        .validate()
        .map_err(|e| CliError::Input(e.to_string()))?;
    let pool = thread_pool(args.workers)?;

    let fits: Vec<CliResult<(FitResult, f64)>> = pool.install(|| {
        series
            .par_iter()
            .map(|s| {
                let t0 = Instant::now();
                let result = mh_search(&s.series, &hyper, &config)
                    .map_err(|e| CliError::from_core(&s.name, e))?;
                let fit = report_from_scored(&s.series, &result.best, &hyper).named(s.name.clone());
                log::info!("{}: {} models scored", s.name, result.visited_count);
                Ok((fit, t0.elapsed().as_secs_f64()))
            })
            .collect()
    });
    let fits: Vec<(FitResult, f64)> = fits.into_iter().collect::<CliResult<_>>()?;

    create_dir(&args.out)?;
    let mut manifest = RunManifest::new(
        &args.inputs,
        json!({
            "command": "detect",
            "hyperparams": hyper,
            "period": args.model.period,
            "iterations": config.iterations,
            "proposal_weights": config.proposal_weights,
            "workers": pool.current_num_threads(),
        }),
    );
    manifest.seeds.insert("chain".into(), config.seed);
    for (fit, secs) in &fits {
        let stem = file_stem_for(&fit.series);
        write_json(&args.out.join(format!("{stem}.json")), fit)?;
        write_plot_csv(&args.out.join(format!("{stem}.plot.csv")), fit)?;
        manifest
            .timings_seconds
            .insert(format!("series:{}", fit.series), *secs);
        print!("{}", fit.summary_text());
    }
    manifest
        .timings_seconds
        .insert("total".into(), started.elapsed().as_secs_f64());
    write_json(&args.out.join("manifest.json"), &manifest)
}

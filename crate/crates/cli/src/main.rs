// SPDX-License-Identifier: MIT OR Apache-2.0

//! `bmdl`: changepoint detection, online monitoring and simulation studies
//! for seasonal, autocorrelated time series.

mod baseline;
mod detect;
mod error;
mod input;
mod monitor;
mod output;
mod simulate;

use std::process::ExitCode;

use bmdl_core::{Hyperparams, PriorScale};
use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "bmdl",
    version,
    about = "Changepoint detection for seasonal, autocorrelated series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Find the best changepoint model for each series.
    Detect(detect::DetectArgs),
    /// Rerun detection as observations arrive and stop at the first detection.
    Monitor(monitor::MonitorArgs),
    /// Run the synthetic detection study.
    Simulate(simulate::SimulateArgs),
    /// Monitor one series with Shewhart control-chart rules.
    Baseline(baseline::BaselineArgs),
}

/// Model-space and prior settings shared by the detecting commands.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Seasonal period T.
    #[arg(long, default_value_t = 12)]
    pub period: usize,
    /// Largest harmonic order [default: floor((T-1)/2)].
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Largest AR order; the first PMAX observations only serve as lags.
    #[arg(long, default_value_t = Hyperparams::DEFAULT_P_MAX)]
    pub pmax: usize,
    /// Prior variance scale of the regime and seasonal coefficients [default: series length].
    #[arg(long)]
    pub nu: Option<f64>,
    /// Beta prior parameter a of the changepoint probability.
    #[arg(long, default_value_t = Hyperparams::DEFAULT_A)]
    pub a: f64,
    /// Beta prior parameter b of the changepoint probability.
    #[arg(long, default_value_t = Hyperparams::DEFAULT_B)]
    pub b: f64,
    /// Shortest admissible regime.
    #[arg(long = "min-regime", default_value_t = Hyperparams::DEFAULT_MIN_REGIME)]
    pub min_regime: usize,
}

impl ModelArgs {
    pub fn hyper(&self) -> CliResult<Hyperparams> {
        let base = Hyperparams::for_period(self.period);
        let hyper = Hyperparams {
            nu: self.nu.map_or(PriorScale::SeriesLength, PriorScale::Fixed),
            a: self.a,
            b: self.b,
            k_max: self.kmax.unwrap_or(base.k_max),
            p_max: self.pmax,
            min_regime_length: self.min_regime,
        };
        if self.period == 0 {
            return Err(CliError::Input("--period must be >= 1".into()));
        }
        hyper
            .validate(self.period)
            .map_err(|e| CliError::Input(e.to_string()))?;
        Ok(hyper)
    }
}

pub fn thread_pool(workers: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    match workers {
        Some(0) => return Err(CliError::Input("--workers must be >= 1".into())),
        Some(w) => builder = builder.num_threads(w),
        None => {}
    }
    builder
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Detect(args) => detect::run(args),
        Command::Monitor(args) => monitor::run(args),
        Command::Simulate(args) => simulate::run(args),
        Command::Baseline(args) => baseline::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bmdl: error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

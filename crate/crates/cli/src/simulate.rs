// SPDX-License-Identifier: MIT OR Apache-2.0

//! `simulate`: the synthetic detection study.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use bmdl_core::simulate::{
    run_study, standard_grid, Method, Scenario, ScenarioSpec, ScenarioSummary, StudySettings,
};
use bmdl_core::{MonitorConfig, SearchConfig};
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::output::{create_dir, csv_rows, write_json, RunManifest};
use crate::{thread_pool, ModelArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Bmdl,
    Shewhart,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Bmdl => Method::Bmdl,
            MethodArg::Shewhart => Method::Shewhart,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// `standard` (alias `paper`): 4 no-change and 104 change scenarios;
    /// otherwise a JSON file holding a list of scenario specs.
    #[arg(long)]
    pub grid: String,
    /// Realizations per scenario.
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Master seed; every realization seed derives from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// AR(1) coefficient of the standard grid.
    #[arg(long, default_value_t = 0.3)]
    pub phi: f64,
    /// Series length of the standard grid.
    #[arg(long, default_value_t = ScenarioSpec::STANDARD_N)]
    pub n: usize,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "bmdl,shewhart"
    )]
    pub methods: Vec<MethodArg>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Monitoring iterations at the first horizon.
    #[arg(long = "base-iters", default_value_t = MonitorConfig::DEFAULT_BASE_ITERATIONS)]
    pub base_iters: usize,
    /// Upper bound on the iterations of any horizon.
    #[arg(long, default_value_t = SearchConfig::DEFAULT_ITERATIONS)]
    pub iters: usize,
    /// Realizations processed concurrently [default: available cores].
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "bmdl-out")]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct Pooled {
    false_positive_rate: Option<f64>,
    true_positive_rate: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    grid: &'a str,
    master_seed: u64,
    reps: usize,
    scenarios: usize,
    pooled: BTreeMap<&'static str, Pooled>,
    summaries: &'a [ScenarioSummary],
    notes: &'a [String],
}

fn load_grid(args: &SimulateArgs) -> CliResult<Vec<Scenario>> {
    let grid = match args.grid.as_str() {
        "standard" | "paper" => {
            if !(args.phi.abs() < 1.0) || args.n <= ScenarioSpec::STANDARD_CP {
                return Err(CliError::Input(format!(
                    "standard grid needs |phi| < 1 and n > {}; got phi={}, n={}",
                    ScenarioSpec::STANDARD_CP,
                    args.phi,
                    args.n
                )));
            }
            standard_grid(args.phi, args.n)
        }
        path if path.ends_with(".json") => {
            let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
            let specs: Vec<ScenarioSpec> = serde_json::from_str(&text)
                .map_err(|e| CliError::Input(format!("{path}: invalid scenario list: {e}")))?;
            specs.into_iter().map(Scenario::new).collect()
        }
        other => {
            return Err(CliError::Input(format!(
                "unknown grid {other:?}; use `standard` or a .json scenario list"
            )))
        }
    };
    if grid.is_empty() {
        return Err(CliError::Input("scenario grid is empty".into()));
    }
    for s in &grid {
        s.spec
            .validate()
            .map_err(|e| CliError::Input(format!("scenario {}: {e}", s.id)))?;
        if s.spec.period != args.model.period {
            return Err(CliError::Input(format!(
                "scenario {} has period {} but --period is {}",
                s.id, s.spec.period, args.model.period
            )));
        }
    }
    Ok(grid)
}

pub fn run(args: SimulateArgs) -> CliResult<()> {
    let started = Instant::now();
    let grid = load_grid(&args)?;
    if args.reps == 0 {
        return Err(CliError::Input("--reps must be >= 1".into()));
    }
    let mut methods: Vec<Method> = Vec::new();
    for &m in &args.methods {
        if !methods.contains(&m.into()) {
            methods.push(m.into());
        }
    }
    if methods.is_empty() {
        return Err(CliError::Input("--methods is empty".into()));
    }
    let mut settings = StudySettings::for_period(args.model.period);
    settings.hyper = args.model.hyper()?;
    settings.monitor.search.iterations = args.base_iters;
    settings.monitor.iteration_cap = args.iters;
    settings
        .monitor
        .search
        .validate()
        .map_err(|e| CliError::Input(e.to_string()))?;
    for s in &grid {
        if s.spec.cp_time <= settings.hyper.p_max + settings.hyper.min_regime_length {
            return Err(CliError::Input(format!(
                "scenario {}: cp_time {} leaves no room to monitor with p_max={} and min regime {}",
                s.id, s.spec.cp_time, settings.hyper.p_max, settings.hyper.min_regime_length
            )));
        }
    }

    let pool = thread_pool(args.workers)?;
    let study = pool
        .install(|| run_study(&grid, args.reps, &methods, args.seed, &settings))
        .map_err(|e| CliError::from_core("simulation", e))?;

    create_dir(&args.out)?;
    let rows = study.records.iter().map(|r| {
        vec![
            r.scenario_id.clone(),
            r.rep.to_string(),
            r.method.name().to_string(),
            r.detected.to_string(),
            r.detection_time.map_or_else(String::new, |v| v.to_string()),
            r.run_length.map_or_else(String::new, |v| v.to_string()),
        ]
    });
    csv_rows(
        &args.out.join("results.csv"),
        &[
            "scenario_id",
            "rep",
            "method",
            "detected",
            "detection_time",
            "run_length",
        ],
        rows,
    )?;
    let pooled = methods
        .iter()
        .map(|&m| {
            (
                m.name(),
                Pooled {
                    false_positive_rate: study.false_positive_rate(m),
                    true_positive_rate: study.true_positive_rate(m),
                },
            )
        })
        .collect();
    let summary = Summary {
        grid: &args.grid,
        master_seed: study.master_seed,
        reps: study.reps,
        scenarios: grid.len(),
        pooled,
        summaries: &study.summaries,
        notes: &study.notes,
    };
    write_json(&args.out.join("summary.json"), &summary)?;

    let mut manifest = RunManifest::new(
        &[],
        json!({
            "command": "simulate",
            "grid": args.grid,
            "phi": args.phi,
            "n": args.n,
            "reps": args.reps,
            "methods": methods.iter().map(|m| m.name()).collect::<Vec<_>>(),
            "study": settings,
            "workers": pool.current_num_threads(),
        }),
    );
    manifest.seeds.insert("master".into(), args.seed);
    manifest
        .timings_seconds
        .insert("total".into(), started.elapsed().as_secs_f64());
    write_json(&args.out.join("manifest.json"), &manifest)?;
    for (name, p) in &summary.pooled {
        println!(
            "{name}: false positive rate {}, true positive rate {}",
            p.false_positive_rate
                .map_or("n/a".into(), |v| format!("{v:.3}")),
            p.true_positive_rate
                .map_or("n/a".into(), |v| format!("{v:.3}"))
        );
    }
    Ok(())
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Multiple changepoint detection for univariate time series.
//!
//! Candidate models combine regime-wise linear segments, a harmonic seasonal
//! cycle and autoregressive errors. Each candidate is scored with a Bayesian
//! minimum description length (BMDL) criterion and the model space is explored
//! with a Metropolis-Hastings chain. On top of the offline detector sit an
//! online monitor, a Shewhart-rules baseline and a simulation study harness.

#![forbid(unsafe_code)]

pub mod arnoise;
pub mod baseline;
mod error;
pub mod linalg;
pub mod model;
pub mod monitor;
pub mod report;
pub mod scoring;
pub mod search;
pub mod simulate;

pub use crate::arnoise::{estimate_ar, whiten, ArFit};
pub use crate::baseline::{
    benchmark_stats, shewhart_alert, shewhart_monitor, BenchmarkStats, ShewhartRule,
};
pub use crate::error::{BmdlError, ModelError};
pub use crate::model::{
    build_design, design_over, regime_index, validate_model, CalendarMonth, ChangepointModel,
    DesignMatrices, Hyperparams, PriorScale, TimeSeries,
};
pub use crate::monitor::{
    monitor_resume, monitor_series, DetectionRule, HorizonRecord, MonitorConfig, MonitorOutcome,
    MonitorState,
};
pub use crate::report::{fit_report, FitResult, Segment};
pub use crate::scoring::{
    bmdl_score, bmdl_terms, profile_design, profile_fit, score_model, ProfileFit, ScoredModel,
};
pub use crate::search::{
    exhaustive_search, mh_search, ModelBounds, SearchConfig, SearchResult, TraceEntry,
};
pub use crate::simulate::{
    generate_scenario, run_study, standard_grid, Method, Scenario, ScenarioSpec, StudyResult,
    StudySettings,
};

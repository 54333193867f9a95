// SPDX-License-Identifier: MIT OR Apache-2.0

//! Shewhart control-chart rules, the comparison method for online monitoring.
//!
//! Sigma bands are taken around the mean of a benchmark window. "Beyond"
//! is strict at every threshold.

use serde::{Deserialize, Serialize};

use crate::error::{BmdlError, Result};
use crate::model::TimeSeries;
use crate::monitor::MonitorOutcome;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkStats {
    pub center: f64,
    /// Sample standard deviation (divisor `n - 1`).
    pub sigma: f64,
    /// Inclusive 1-based window.
    pub window: (usize, usize),
}

/// Benchmark mean and standard deviation over `values[start-1..end]`.
pub fn benchmark_stats(values: &[f64], window: (usize, usize)) -> Result<BenchmarkStats> {
    let (start, end) = window;
    if start == 0 || end > values.len() || end < start + 1 {
        return Err(BmdlError::InvalidConfig(format!(
            "benchmark window {start}..={end} must hold at least 2 points inside 1..={}",
            values.len()
        )));
    }
    let w = &values[start - 1..end];
    let n = w.len() as f64;
    let center = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|v| (v - center).powi(2)).sum::<f64>() / (n - 1.0);
    let sigma = var.sqrt();
    if !(sigma > 0.0) {
        return Err(BmdlError::InvalidConfig(
            "benchmark window has zero variance".into(),
        ));
    }
    Ok(BenchmarkStats {
        center,
        sigma,
        window,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShewhartRule {
    /// Last point beyond 4 sigma.
    OneBeyondFour = 1,
    /// Two of the last three beyond 3 sigma on the same side.
    TwoOfThreeBeyondThree = 2,
    /// Last eight beyond 1 sigma on the same side.
    EightBeyondOne = 3,
}

impl ShewhartRule {
    pub fn id(self) -> u8 {
        self as u8
    }
}

/// Signed deviation in sigma units.
fn z(x: f64, stats: &BenchmarkStats) -> f64 {
    (x - stats.center) / stats.sigma
}

/// Evaluates the three rules on the most recent points of `recent` and
/// returns the lowest-numbered rule that fires.
pub fn shewhart_alert(recent: &[f64], stats: &BenchmarkStats) -> Option<ShewhartRule> {
    let last = *recent.last()?;
    if z(last, stats).abs() > 4.0 {
        return Some(ShewhartRule::OneBeyondFour);
    }
    if recent.len() >= 3 {
        let tail = &recent[recent.len() - 3..];
        let above = tail.iter().filter(|&&x| z(x, stats) > 3.0).count();
        let below = tail.iter().filter(|&&x| z(x, stats) < -3.0).count();
        if above >= 2 || below >= 2 {
            return Some(ShewhartRule::TwoOfThreeBeyondThree);
        }
    }
    if recent.len() >= 8 {
        let tail = &recent[recent.len() - 8..];
        if tail.iter().all(|&x| z(x, stats) > 1.0) || tail.iter().all(|&x| z(x, stats) < -1.0) {
            return Some(ShewhartRule::EightBeyondOne);
        }
    }
    None
}

/// Scans horizons `start_time..=n` and stops at the first alert.
pub fn shewhart_monitor(
    ts: &TimeSeries,
    window: (usize, usize),
    start_time: usize,
    reference_time: Option<usize>,
) -> Result<MonitorOutcome> {
    Ok(shewhart_scan(ts, window, start_time, reference_time)?.0)
}

/// Like [`shewhart_monitor`], also reporting the rule that fired.
pub fn shewhart_scan(
    ts: &TimeSeries,
    window: (usize, usize),
    start_time: usize,
    reference_time: Option<usize>,
) -> Result<(MonitorOutcome, Option<ShewhartRule>)> {
    let stats = benchmark_stats(ts.values(), window)?;
    if start_time == 0 || ts.len() < start_time {
        return Err(BmdlError::InsufficientData {
            needed: start_time.max(1),
            available: ts.len(),
        });
    }
    for horizon in start_time..=ts.len() {
        if let Some(rule) = shewhart_alert(&ts.values()[..horizon], &stats) {
            return Ok((
                MonitorOutcome::detected_at(horizon, Vec::new(), reference_time),
                Some(rule),
            ));
        }
    }
    Ok((MonitorOutcome::none(), None))
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Online monitoring by repeated offline detection on growing prefixes.
//!
//! At each horizon `h = start_time..=n` the detector is rerun on
//! observations `1..=h`; monitoring stops at the first horizon whose best
//! model satisfies the detection rule.

use serde::{Deserialize, Serialize};

use crate::error::{BmdlError, Result};
use crate::model::{validate_model, ChangepointModel, Hyperparams, TimeSeries};
use crate::scoring::ScoredModel;
use crate::search::{mh_search_from, SearchConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionRule {
    /// The best model contains any changepoint.
    AnyChangepoint,
    /// The best model contains a changepoint among the last `window` observations.
    RecentChangepoint { window: usize },
}

impl DetectionRule {
    pub fn fires(&self, model: &ChangepointModel, horizon: usize) -> bool {
        match *self {
            Self::AnyChangepoint => model.m() > 0,
            Self::RecentChangepoint { window } => {
                model.changepoints().iter().any(|&t| t + window > horizon)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub start_time: usize,
    /// Per-horizon chain settings; `search.iterations` is the budget at `start_time`.
    pub search: SearchConfig,
    /// Upper bound on the per-horizon budget.
    pub iteration_cap: usize,
    pub detection_rule: DetectionRule,
}

impl MonitorConfig {
    pub const DEFAULT_BASE_ITERATIONS: usize = 10_000;

    pub fn new(start_time: usize, seed: u64) -> Self {
        Self {
            start_time,
            search: SearchConfig {
                iterations: Self::DEFAULT_BASE_ITERATIONS,
                seed,
                ..SearchConfig::default()
            },
            iteration_cap: SearchConfig::DEFAULT_ITERATIONS,
            detection_rule: DetectionRule::AnyChangepoint,
        }
    }

    /// Iterations for horizon `h`: the base budget scaled by `h / start_time`,
    /// capped at `iteration_cap`.
    pub fn budget(&self, horizon: usize) -> usize {
        let scaled = (self.search.iterations as u128 * horizon as u128)
            .div_ceil(self.start_time.max(1) as u128);
        (scaled as usize).clamp(1, self.iteration_cap.max(1))
    }

    /// Seed for the chain at horizon `h`.
    pub fn seed_for(&self, horizon: usize) -> u64 {
        self.search.seed ^ horizon as u64
    }

    pub fn validate(&self, hyper: &Hyperparams) -> Result<()> {
        self.search.validate()?;
        if self.start_time <= hyper.p_max + hyper.min_regime_length {
            return Err(BmdlError::InvalidConfig(format!(
                "start_time={} must exceed p_max + min_regime_length = {}",
                self.start_time,
                hyper.p_max + hyper.min_regime_length
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorOutcome {
    pub detected: bool,
    /// Last observation included when detection was declared.
    pub detection_time: Option<usize>,
    pub detected_changepoints: Vec<usize>,
    /// `detection_time - reference_time`, when both exist and the difference is nonnegative.
    pub run_length: Option<usize>,
}

impl MonitorOutcome {
    pub fn none() -> Self {
        Self {
            detected: false,
            detection_time: None,
            detected_changepoints: Vec::new(),
            run_length: None,
        }
    }

    pub fn detected_at(time: usize, changepoints: Vec<usize>, reference: Option<usize>) -> Self {
        Self {
            detected: true,
            detection_time: Some(time),
            detected_changepoints: changepoints,
            run_length: reference.and_then(|r| time.checked_sub(r)),
        }
    }
}

/// Resumable progress of one monitored series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorState {
    /// Next horizon to evaluate.
    pub next_horizon: usize,
    /// Best model at the last evaluated horizon, used to warm-start the next chain.
    pub warm_start: Option<ChangepointModel>,
    /// Set once detection has been declared; monitoring never continues past it.
    pub outcome: Option<MonitorOutcome>,
}

impl MonitorState {
    pub fn initial(config: &MonitorConfig) -> Self {
        Self {
            next_horizon: config.start_time,
            warm_start: None,
            outcome: None,
        }
    }
}

/// What the monitor saw at one horizon.
#[derive(Clone, Debug)]
pub struct HorizonRecord<'a> {
    pub horizon: usize,
    /// The exact prefix handed to the detector.
    pub prefix: &'a TimeSeries,
    pub best: &'a ScoredModel,
    pub fired: bool,
}

/// Monitors `ts` from `config.start_time` until the first detection.
pub fn monitor_series(
    ts: &TimeSeries,
    hyper: &Hyperparams,
    config: &MonitorConfig,
    reference_time: Option<usize>,
) -> Result<MonitorOutcome> {
    let (outcome, _) = monitor_resume(
        ts,
        hyper,
        config,
        reference_time,
        MonitorState::initial(config),
        |_| {},
    )?;
    Ok(outcome)
}

/// Continues monitoring from `state` over whatever data `ts` now holds.
///
/// Returns the outcome so far (no detection if the data ran out first) and the
/// state to resume from once more observations arrive.
pub fn monitor_resume(
    ts: &TimeSeries,
    hyper: &Hyperparams,
    config: &MonitorConfig,
    reference_time: Option<usize>,
    mut state: MonitorState,
    mut observer: impl FnMut(&HorizonRecord<'_>),
) -> Result<(MonitorOutcome, MonitorState)> {
    config.validate(hyper)?;
    hyper.validate(ts.period())?;
    if ts.len() < config.start_time {
        return Err(BmdlError::InsufficientData {
            needed: config.start_time,
            available: ts.len(),
        });
    }
    if let Some(outcome) = &state.outcome {
        return Ok((outcome.clone(), state));
    }

    for horizon in state.next_horizon.max(config.start_time)..=ts.len() {
        let prefix = ts.prefix(horizon);
        let start = state
            .warm_start
            .as_ref()
            .filter(|m| m.n() < horizon)
            .map(|m| m.extended_to(horizon))
            .filter(|m| validate_model(m, hyper, horizon).is_ok())
            .unwrap_or_else(|| ChangepointModel::null(horizon));
        let search = SearchConfig {
            iterations: config.budget(horizon),
            seed: config.seed_for(horizon),
            ..config.search.clone()
        };
        let result = mh_search_from(&prefix, hyper, &search, start)?;
        let fired = config.detection_rule.fires(&result.best.model, horizon);
        observer(&HorizonRecord {
            horizon,
            prefix: &prefix,
            best: &result.best,
            fired,
        });
        state.next_horizon = horizon + 1;
        state.warm_start = Some(result.best.model.clone());
        if fired {
            let outcome = MonitorOutcome::detected_at(
                horizon,
                result.best.model.changepoints().to_vec(),
                reference_time,
            );
            state.outcome = Some(outcome.clone());
            return Ok((outcome, state));
        }
    }
    Ok((MonitorOutcome::none(), state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn series(seed: u64, n: usize, f: impl Fn(usize) -> f64) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (1..=n)
            .map(|t| {
                f(t) + {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    e
                }
            })
            .collect();
        TimeSeries::new(v, 12).unwrap()
    }

    fn quick(start: usize, seed: u64) -> MonitorConfig {
        let mut cfg = MonitorConfig::new(start, seed);
        cfg.search.iterations = 2_000;
        cfg.iteration_cap = 4_000;
        cfg
    }

    #[test]
    fn run_length_examples() {
        assert_eq!(
            MonitorOutcome::detected_at(60, vec![59], Some(60)).run_length,
            Some(0)
        );
        assert_eq!(
            MonitorOutcome::detected_at(61, vec![60], Some(60)).run_length,
            Some(1)
        );
        assert_eq!(
            MonitorOutcome::detected_at(55, vec![50], Some(60)).run_length,
            None
        );
        assert_eq!(
            MonitorOutcome::detected_at(61, vec![60], None).run_length,
            None
        );
    }

    #[test]
    fn budget_scales_and_caps() {
        let cfg = MonitorConfig::new(60, 0);
        assert_eq!(cfg.budget(60), 10_000);
        assert_eq!(cfg.budget(120), 20_000);
        assert_eq!(cfg.budget(1_000), 100_000);
    }

    #[test]
    fn strong_step_detected_quickly_with_prefix_discipline() {
        let ts = series(1, 100, |t| if t >= 60 { 10.0 } else { 0.0 });
        let hyper = Hyperparams::for_period(12);
        let mut horizons = Vec::new();
        let (outcome, state) = monitor_resume(
            &ts,
            &hyper,
            &quick(50, 3),
            Some(60),
            MonitorState::initial(&quick(50, 3)),
            |rec| {
                assert_eq!(rec.prefix.len(), rec.horizon);
                assert_eq!(rec.prefix.values(), &ts.values()[..rec.horizon]);
                horizons.push(rec.horizon);
            },
        )
        .unwrap();
        assert!(outcome.detected);
        let when = outcome.detection_time.unwrap();
        assert!((60..=62).contains(&when), "detected at {when}");
        // stops at the first detection
        assert_eq!(*horizons.last().unwrap(), when);
        assert_eq!(horizons, (50..=when).collect::<Vec<_>>());
        assert_eq!(state.next_horizon, when + 1);
    }

    #[test]
    fn resumption_matches_full_run() {
        let ts = series(2, 90, |t| if t >= 75 { 8.0 } else { 0.0 });
        let hyper = Hyperparams::for_period(12);
        let cfg = quick(40, 9);
        let full = monitor_series(&ts, &hyper, &cfg, Some(75)).unwrap();

        let partial = ts.prefix(70);
        let (first, state) = monitor_resume(
            &partial,
            &hyper,
            &cfg,
            Some(75),
            MonitorState::initial(&cfg),
            |_| {},
        )
        .unwrap();
        assert!(!first.detected, "{first:?}");
        let (resumed, _) = monitor_resume(&ts, &hyper, &cfg, Some(75), state, |_| {}).unwrap();
        assert_eq!(resumed, full);
    }

    #[test]
    fn short_series_rejected() {
        let ts = series(3, 40, |_| 0.0);
        let hyper = Hyperparams::for_period(12);
        assert!(monitor_series(&ts, &hyper, &quick(60, 0), None).is_err());
        assert!(monitor_series(&ts, &hyper, &quick(6, 0), None).is_err());
    }

    #[test]
    fn recent_rule_ignores_old_changepoints() {
        let rule = DetectionRule::RecentChangepoint { window: 5 };
        let m = ChangepointModel::new(100, vec![40], 0, 0).unwrap();
        assert!(!rule.fires(&m, 100));
        assert!(rule.fires(&m, 44));
        assert!(DetectionRule::AnyChangepoint.fires(&m, 100));
    }
}

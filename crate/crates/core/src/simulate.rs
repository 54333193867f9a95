// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic scenarios and the comparative monitoring study.
//!
//! Each scenario is a linear segment with at most one change (level jump
//! and/or slope change at `cp_time`), a sinusoidal seasonal cycle and AR(1)
//! noise. The study monitors every realization online with both the BMDL
//! detector and the Shewhart rules and aggregates detection rates and run
//! lengths.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::shewhart_monitor;
use crate::error::{BmdlError, Result};
use crate::model::{harmonic_terms, Hyperparams, TimeSeries};
use crate::monitor::{monitor_series, MonitorConfig, MonitorOutcome};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n: usize,
    pub cp_time: usize,
    pub slope_before: f64,
    pub slope_after: f64,
    pub jump: f64,
    /// AR(1) coefficient of the noise.
    pub phi: f64,
    pub innovation_variance: f64,
    /// Peak-to-trough range of the seasonal cycle.
    pub seasonal_range: f64,
    pub period: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    pub const STANDARD_N: usize = 500;
    pub const STANDARD_CP: usize = 60;
    pub const STANDARD_SEASONAL_RANGE: f64 = 6.0;

    /// A no-change white-noise scenario of length `n`.
    pub fn white_noise(n: usize, seed: u64) -> Self {
        Self {
            n,
            cp_time: Self::STANDARD_CP.min(n.saturating_sub(1)),
            slope_before: 0.0,
            slope_after: 0.0,
            jump: 0.0,
            phi: 0.0,
            innovation_variance: 1.0,
            seasonal_range: 0.0,
            period: 12,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BmdlError::InvalidConfig(m));
        if self.n <= self.cp_time {
            return bad(format!("n={} must exceed cp_time={}", self.n, self.cp_time));
        }
        if self.cp_time == 0 {
            return bad("cp_time must be >= 1".into());
        }
        if !(self.phi.abs() < 1.0) {
            return bad(format!("|phi| must be < 1; got {}", self.phi));
        }
        if !(self.seasonal_range >= 0.0) {
            return bad(format!(
                "seasonal_range must be >= 0; got {}",
                self.seasonal_range
            ));
        }
        if !(self.innovation_variance > 0.0) || self.period == 0 {
            return bad("innovation_variance must be > 0 and period >= 1".into());
        }
        Ok(())
    }

    pub fn has_change(&self) -> bool {
        self.jump != 0.0 || self.slope_before != self.slope_after
    }

    /// Noise-free mean level at `t`.
    pub fn linear_at(&self, t: usize) -> f64 {
        let t = t as f64;
        let cp = self.cp_time as f64;
        if t < cp {
            self.slope_before * t
        } else {
            self.slope_before * cp + self.slope_after * (t - cp) + self.jump
        }
    }

    pub fn seasonal_at(&self, t: usize) -> f64 {
        0.5 * self.seasonal_range * harmonic_terms(t, 1, self.period).0
    }
}

/// The additive pieces of a generated series, each indexed by `t - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioComponents {
    pub linear: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub noise: Vec<f64>,
}

pub fn generate_components(spec: &ScenarioSpec) -> Result<ScenarioComponents> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sd = spec.innovation_variance.sqrt();
    let mut noise = Vec::with_capacity(spec.n);
    // stationary start
    let z0: f64 = StandardNormal.sample(&mut rng);
    let mut prev = z0 * sd / (1.0 - spec.phi * spec.phi).sqrt();
    noise.push(prev);
    for _ in 1..spec.n {
        let z: f64 = StandardNormal.sample(&mut rng);
        prev = spec.phi * prev + sd * z;
        noise.push(prev);
    }
    Ok(ScenarioComponents {
        linear: (1..=spec.n).map(|t| spec.linear_at(t)).collect(),
        seasonal: (1..=spec.n).map(|t| spec.seasonal_at(t)).collect(),
        noise,
    })
}

pub fn generate_scenario(spec: &ScenarioSpec) -> Result<TimeSeries> {
    let c = generate_components(spec)?;
    let values = c
        .linear
        .iter()
        .zip(&c.seasonal)
        .zip(&c.noise)
        .map(|((l, s), e)| l + s + e)
        .collect();
    TimeSeries::new(values, spec.period)
}

/// A named scenario of a study grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub is_change: bool,
    /// Template; the seed is replaced per realization.
    pub spec: ScenarioSpec,
}

impl Scenario {
    pub fn new(spec: ScenarioSpec) -> Self {
        let id = format!(
            "slope{:+.2}->{:+.2}_jump{:+}",
            spec.slope_before, spec.slope_after, spec.jump
        );
        Self {
            id,
            is_change: spec.has_change(),
            spec,
        }
    }
}

/// Trend rows of the change scenarios, `(before, after)`.
pub const CHANGE_SLOPES: [(f64, f64); 5] = [
    (0.0, 0.0),
    (0.05, -0.05),
    (0.1, -0.1),
    (0.2, -0.2),
    (0.3, -0.3),
];
/// Constant trends of the no-change scenarios.
pub const NO_CHANGE_SLOPES: [f64; 4] = [0.0, 0.1, 0.2, 0.3];

/// The 4 no-change and 104 change scenarios (jumps `10, 9, ..., -10`).
pub fn standard_grid(phi: f64, n: usize) -> Vec<Scenario> {
    let template = |slope_before, slope_after, jump| ScenarioSpec {
        n,
        cp_time: ScenarioSpec::STANDARD_CP,
        slope_before,
        slope_after,
        jump,
        phi,
        innovation_variance: 1.0,
        seasonal_range: ScenarioSpec::STANDARD_SEASONAL_RANGE,
        period: 12,
        seed: 0,
    };
    let mut grid: Vec<Scenario> = NO_CHANGE_SLOPES
        .iter()
        .map(|&s| Scenario::new(template(s, s, 0.0)))
        .collect();
    for &(before, after) in &CHANGE_SLOPES {
        for jump in (-10..=10).rev() {
            let spec = template(before, after, jump as f64);
            if spec.has_change() {
                grid.push(Scenario::new(spec));
            }
        }
    }
    grid
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bmdl,
    Shewhart,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Bmdl => "bmdl",
            Self::Shewhart => "shewhart",
        }
    }
}

/// Detector settings shared by every cell of a study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySettings {
    pub hyper: Hyperparams,
    /// `start_time` is taken from each scenario's `cp_time`; the seed is derived per cell.
    pub monitor: MonitorConfig,
}

impl StudySettings {
    pub fn for_period(period: usize) -> Self {
        Self {
            hyper: Hyperparams::for_period(period),
            monitor: MonitorConfig::new(ScenarioSpec::STANDARD_CP, 0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub scenario_id: String,
    pub rep: usize,
    pub method: Method,
    pub detected: bool,
    pub detection_time: Option<usize>,
    pub run_length: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario_id: String,
    pub is_change: bool,
    pub method: Method,
    pub reps: usize,
    pub detections: usize,
    /// False positive rate for no-change scenarios, true positive rate otherwise.
    pub detection_rate: f64,
    /// Median run length over detected realizations.
    pub median_run_length: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub master_seed: u64,
    pub reps: usize,
    pub records: Vec<RealizationRecord>,
    pub summaries: Vec<ScenarioSummary>,
    pub notes: Vec<String>,
}

impl StudyResult {
    pub fn summary(&self, scenario_id: &str, method: Method) -> Option<&ScenarioSummary> {
        self.summaries
            .iter()
            .find(|s| s.scenario_id == scenario_id && s.method == method)
    }

    /// Detection rate pooled over the scenarios selected by `keep`.
    pub fn pooled_rate(
        &self,
        method: Method,
        keep: impl Fn(&ScenarioSummary) -> bool,
    ) -> Option<f64> {
        let (hits, total) = self
            .summaries
            .iter()
            .filter(|s| s.method == method && keep(s))
            .fold((0, 0), |(h, n), s| (h + s.detections, n + s.reps));
        (total > 0).then(|| hits as f64 / total as f64)
    }

    pub fn false_positive_rate(&self, method: Method) -> Option<f64> {
        self.pooled_rate(method, |s| !s.is_change)
    }

    pub fn true_positive_rate(&self, method: Method) -> Option<f64> {
        self.pooled_rate(method, |s| s.is_change)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// FNV-1a, stable across platforms and releases.
fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Seed of realization `rep` of scenario `scenario_id`.
pub fn cell_seed(master: u64, scenario_id: &str, rep: usize) -> u64 {
    splitmix64(splitmix64(master ^ stable_hash(scenario_id)) ^ rep as u64)
}

/// Median of a nonempty list.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    })
}

fn run_cell(
    scenario: &Scenario,
    rep: usize,
    methods: &[Method],
    master: u64,
    settings: &StudySettings,
) -> Result<Vec<RealizationRecord>> {
    let seed = cell_seed(master, &scenario.id, rep);
    let spec = ScenarioSpec {
        seed,
        ..scenario.spec.clone()
    };
    let ts = generate_scenario(&spec)?;
    let cp = spec.cp_time;
    methods
        .iter()
        .map(|&method| {
            let outcome: MonitorOutcome = match method {
                Method::Bmdl => {
                    let mut cfg = settings.monitor.clone();
                    cfg.start_time = cp;
                    cfg.search.seed = splitmix64(seed);
                    monitor_series(&ts, &settings.hyper, &cfg, Some(cp))?
                }
                Method::Shewhart => shewhart_monitor(&ts, (1, cp - 1), cp, Some(cp))?,
            };
            Ok(RealizationRecord {
                scenario_id: scenario.id.clone(),
                rep,
                method,
                detected: outcome.detected,
                detection_time: outcome.detection_time,
                run_length: outcome.run_length,
            })
        })
        .collect()
}

/// Runs every scenario `reps` times with each method.
pub fn run_study(
    grid: &[Scenario],
    reps: usize,
    methods: &[Method],
    seed: u64,
    settings: &StudySettings,
) -> Result<StudyResult> {
    if reps == 0 {
        return Err(BmdlError::InvalidConfig("reps must be >= 1".into()));
    }
    if grid.is_empty() {
        return Err(BmdlError::InvalidConfig("scenario grid is empty".into()));
    }
    if methods.is_empty() {
        return Err(BmdlError::InvalidConfig("no methods selected".into()));
    }
    let cells: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|s| (0..reps).map(move |r| (s, r)))
        .collect();
    let per_cell: Vec<Vec<RealizationRecord>> = cells
        .par_iter()
        .map(|&(s, r)| run_cell(&grid[s], r, methods, seed, settings))
        .collect::<Result<_>>()?;
    let records: Vec<RealizationRecord> = per_cell.into_iter().flatten().collect();

    let mut summaries = Vec::with_capacity(grid.len() * methods.len());
    for scenario in grid {
        for &method in methods {
            let rows: Vec<&RealizationRecord> = records
                .iter()
                .filter(|r| r.method == method && r.scenario_id == scenario.id)
                .collect();
            let detections = rows.iter().filter(|r| r.detected).count();
            let mut runs: Vec<f64> = rows
                .iter()
                .filter(|r| r.detected)
                .filter_map(|r| r.run_length.map(|v| v as f64))
                .collect();
            summaries.push(ScenarioSummary {
                scenario_id: scenario.id.clone(),
                is_change: scenario.is_change,
                method,
                reps,
                detections,
                detection_rate: detections as f64 / reps as f64,
                median_run_length: median(&mut runs),
            });
        }
    }

    let mut notes = Vec::new();
    if methods.contains(&Method::Shewhart) {
        notes.push(
            "Shewhart benchmark window is 1..cp_time-1, which uses knowledge of the true \
             changepoint and is not available in real monitoring."
                .to_string(),
        );
    }
    Ok(StudyResult {
        master_seed: seed,
        reps,
        records,
        summaries,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arnoise::autocorrelation;

    #[test]
    fn standard_grid_counts() {
        let grid = standard_grid(0.3, 500);
        assert_eq!(grid.len(), 108);
        assert_eq!(grid.iter().filter(|s| !s.is_change).count(), 4);
        assert_eq!(grid.iter().filter(|s| s.is_change).count(), 104);
        let ids: std::collections::BTreeSet<_> = grid.iter().map(|s| &s.id).collect();
        assert_eq!(ids.len(), 108);
    }

    #[test]
    fn white_noise_when_structure_off() {
        let spec = ScenarioSpec::white_noise(300, 4);
        let c = generate_components(&spec).unwrap();
        assert!(c.linear.iter().all(|&v| v == 0.0));
        assert!(c.seasonal.iter().all(|&v| v == 0.0));
        assert!(autocorrelation(&c.noise, 1).abs() < 0.15);
    }

    #[test]
    fn jump_shifts_mean_exactly() {
        let spec = ScenarioSpec {
            jump: 10.0,
            seasonal_range: 6.0,
            ..ScenarioSpec::white_noise(200, 1)
        };
        let diff = (spec.linear_at(60) + spec.seasonal_at(60))
            - (spec.linear_at(59) + spec.seasonal_at(59));
        let seasonal_diff = spec.seasonal_at(60) - spec.seasonal_at(59);
        assert!((diff - (10.0 + seasonal_diff)).abs() < 1e-12);
    }

    #[test]
    fn slope_change_is_continuous_kink() {
        let spec = ScenarioSpec {
            slope_before: 0.2,
            slope_after: -0.2,
            ..ScenarioSpec::white_noise(200, 1)
        };
        assert!((spec.linear_at(59) - 11.8).abs() < 1e-12);
        assert!((spec.linear_at(60) - 12.0).abs() < 1e-12);
        assert!((spec.linear_at(61) - 11.8).abs() < 1e-12);
    }

    #[test]
    fn seasonal_range_and_periodicity() {
        let spec = ScenarioSpec {
            seasonal_range: 6.0,
            ..ScenarioSpec::white_noise(120, 1)
        };
        let c = generate_components(&spec).unwrap();
        let max = c.seasonal.iter().cloned().fold(f64::MIN, f64::max);
        let min = c.seasonal.iter().cloned().fold(f64::MAX, f64::min);
        assert!((max - min - 6.0).abs() < 1e-12);
        for t in 0..108 {
            assert_eq!(c.seasonal[t], c.seasonal[t + 12]);
        }
    }

    #[test]
    fn ar_noise_has_target_autocorrelation() {
        for seed in 0..5 {
            let spec = ScenarioSpec {
                phi: 0.5,
                ..ScenarioSpec::white_noise(500, seed)
            };
            let c = generate_components(&spec).unwrap();
            assert!((autocorrelation(&c.noise, 1) - 0.5).abs() < 0.1);
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let base = ScenarioSpec::white_noise(100, 0);
        assert!(ScenarioSpec {
            phi: 1.0,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(ScenarioSpec {
            cp_time: 100,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(ScenarioSpec {
            seasonal_range: -1.0,
            ..base
        }
        .validate()
        .is_err());
    }

    #[test]
    fn seeds_depend_on_scenario_and_rep_only() {
        assert_eq!(cell_seed(1, "a", 3), cell_seed(1, "a", 3));
        assert_ne!(cell_seed(1, "a", 3), cell_seed(1, "a", 4));
        assert_ne!(cell_seed(1, "a", 3), cell_seed(1, "b", 3));
        assert_ne!(cell_seed(1, "a", 3), cell_seed(2, "a", 3));
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&mut []), None);
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }

    #[test]
    fn single_realization_study() {
        let grid = vec![Scenario::new(ScenarioSpec::white_noise(90, 0))];
        let mut settings = StudySettings::for_period(12);
        settings.monitor.search.iterations = 1_000;
        settings.monitor.iteration_cap = 2_000;
        let res = run_study(&grid, 1, &[Method::Bmdl, Method::Shewhart], 7, &settings).unwrap();
        assert_eq!(res.summaries.len(), 2);
        for s in &res.summaries {
            assert!(s.detection_rate == 0.0 || s.detection_rate == 1.0);
            assert!(!s.is_change);
        }
        assert_eq!(res.records.len(), 2);
        let again = run_study(&grid, 1, &[Method::Bmdl, Method::Shewhart], 7, &settings).unwrap();
        assert_eq!(res, again);
        assert!(run_study(&grid, 0, &[Method::Bmdl], 7, &settings).is_err());
        assert!(run_study(&[], 1, &[Method::Bmdl], 7, &settings).is_err());
    }
}

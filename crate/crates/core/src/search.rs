// SPDX-License-Identifier: MIT OR Apache-2.0

//! Model search over `(eta, k, p)`.
//!
//! [`mh_search`] runs a Metropolis-Hastings chain targeting `exp(-BMDL)` and
//! keeps the best model it has scored. [`exhaustive_search`] enumerates a
//! bounded model space and serves as an oracle on small instances.

use std::collections::HashMap;
use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BmdlError, Result};
use crate::model::{validate_model, ChangepointModel, Hyperparams, TimeSeries};
use crate::scoring::{bmdl_score, score_model, ScoredModel};

/// Restriction of the model space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelBounds {
    pub max_changepoints: Option<usize>,
    pub k_range: RangeInclusive<usize>,
    pub p_range: RangeInclusive<usize>,
}

impl ModelBounds {
    /// The full space allowed by `hyper`.
    pub fn from_hyper(hyper: &Hyperparams) -> Self {
        Self {
            max_changepoints: None,
            k_range: 0..=hyper.k_max,
            p_range: 0..=hyper.p_max,
        }
    }

    /// Intersects with the space allowed by `hyper`.
    fn clamp(&self, hyper: &Hyperparams) -> Self {
        Self {
            max_changepoints: self.max_changepoints,
            k_range: *self.k_range.start()..=(*self.k_range.end()).min(hyper.k_max),
            p_range: *self.p_range.start()..=(*self.p_range.end()).min(hyper.p_max),
        }
    }

    pub fn admits(&self, model: &ChangepointModel) -> bool {
        self.max_changepoints.is_none_or(|cap| model.m() <= cap)
            && self.k_range.contains(&model.k)
            && self.p_range.contains(&model.p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub iterations: usize,
    pub seed: u64,
    /// Probabilities of proposing an `eta` flip, a new `k`, a new `p`.
    pub proposal_weights: [f64; 3],
    pub record_trace: bool,
    pub bounds: Option<ModelBounds>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            iterations: Self::DEFAULT_ITERATIONS,
            seed: 0,
            proposal_weights: [0.8, 0.1, 0.1],
            record_trace: false,
            bounds: None,
        }
    }
}

impl SearchConfig {
    pub const DEFAULT_ITERATIONS: usize = 100_000;

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(BmdlError::InvalidConfig("iterations must be >= 1".into()));
        }
        let w = &self.proposal_weights;
        if w.iter().any(|x| !x.is_finite() || *x < 0.0)
            || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(BmdlError::InvalidConfig(format!(
                "proposal weights must be nonnegative and sum to 1; got {w:?}"
            )));
        }
        Ok(())
    }
}

/// Chain state after one iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub bmdl: f64,
    pub m: usize,
    pub k: usize,
    pub p: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: ScoredModel,
    /// Distinct models scored.
    pub visited_count: usize,
    pub acceptance_rate: f64,
    pub trace: Option<Vec<TraceEntry>>,
    /// Fraction of iterations in which `eta_t = 1`, indexed by `t - 1`.
    pub eta_marginals: Vec<f64>,
}

/// A proposed move from the current model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Proposal {
    FlipEta(usize),
    SetK(usize),
    SetP(usize),
}

impl Proposal {
    pub fn apply(self, model: &ChangepointModel) -> ChangepointModel {
        match self {
            Self::FlipEta(t) => model.flip(t),
            Self::SetK(k) => model.with_k(k),
            Self::SetP(p) => model.with_p(p),
        }
    }
}

/// `min(1, exp(current - proposal))`.
pub fn acceptance_probability(current_bmdl: f64, proposal_bmdl: f64) -> f64 {
    (current_bmdl - proposal_bmdl).exp().min(1.0)
}

/// Draws a value uniformly from `range` excluding `current`.
fn draw_other<R: Rng>(rng: &mut R, range: &RangeInclusive<usize>, current: usize) -> Option<usize> {
    let (lo, hi) = (*range.start(), *range.end());
    if hi < lo {
        return None;
    }
    let size = hi - lo + 1;
    let excluded = range.contains(&current);
    let choices = size - usize::from(excluded);
    if choices == 0 {
        return None;
    }
    let mut v = lo + rng.random_range(0..choices);
    if excluded && v >= current {
        v += 1;
    }
    Some(v)
}

/// Incumbent ordering without materializing a full [`ScoredModel`].
fn beats(a_score: f64, a: &ChangepointModel, b_score: f64, b: &ChangepointModel) -> bool {
    a_score
        .total_cmp(&b_score)
        .then_with(|| a.m().cmp(&b.m()))
        .then_with(|| a.k.cmp(&b.k))
        .then_with(|| a.p.cmp(&b.p))
        .then_with(|| a.changepoints().cmp(b.changepoints()))
        .is_lt()
}

/// A Metropolis-Hastings chain with score memoization.
pub struct Chain<'a> {
    ts: &'a TimeSeries,
    hyper: &'a Hyperparams,
    weights: [f64; 3],
    bounds: ModelBounds,
    rng: ChaCha8Rng,
    cache: HashMap<ChangepointModel, Option<f64>>,
    current: ChangepointModel,
    current_bmdl: f64,
    best: ChangepointModel,
    best_bmdl: f64,
    iterations: usize,
    accepted: usize,
}

impl<'a> Chain<'a> {
    /// Starts a chain at `start`, which must be valid and scoreable.
    pub fn new(
        ts: &'a TimeSeries,
        hyper: &'a Hyperparams,
        config: &SearchConfig,
        start: ChangepointModel,
    ) -> Result<Self> {
        config.validate()?;
        hyper.validate(ts.period())?;
        ts.check_against(hyper)?;
        let bounds = config
            .bounds
            .as_ref()
            .map_or_else(|| ModelBounds::from_hyper(hyper), |b| b.clamp(hyper));
        validate_model(&start, hyper, ts.len())?;
        let start_bmdl = bmdl_score(ts, &start, hyper)?;
        let mut cache = HashMap::new();
        cache.insert(start.clone(), Some(start_bmdl));
        Ok(Self {
            ts,
            hyper,
            weights: config.proposal_weights,
            bounds,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            cache,
            best: start.clone(),
            best_bmdl: start_bmdl,
            current: start,
            current_bmdl: start_bmdl,
            iterations: 0,
            accepted: 0,
        })
    }

    pub fn current(&self) -> (&ChangepointModel, f64) {
        (&self.current, self.current_bmdl)
    }

    pub fn best(&self) -> (&ChangepointModel, f64) {
        (&self.best, self.best_bmdl)
    }

    pub fn visited_count(&self) -> usize {
        self.cache.len()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.iterations == 0 {
            0.0
        } else {
            self.accepted as f64 / self.iterations as f64
        }
    }

    /// Draws a move type by the proposal weights, then a target uniformly.
    /// `eta` flips only touch `t = p_max+1..=n`.
    pub fn propose(&mut self) -> Option<Proposal> {
        let u: f64 = self.rng.random();
        let [w_eta, w_k, _] = self.weights;
        if u < w_eta {
            let lo = self.hyper.p_max + 1;
            let n = self.ts.len();
            Some(Proposal::FlipEta(self.rng.random_range(lo..=n)))
        } else if u < w_eta + w_k {
            draw_other(&mut self.rng, &self.bounds.k_range, self.current.k).map(Proposal::SetK)
        } else {
            draw_other(&mut self.rng, &self.bounds.p_range, self.current.p).map(Proposal::SetP)
        }
    }

    fn score_cached(&mut self, model: &ChangepointModel) -> Option<f64> {
        if let Some(&s) = self.cache.get(model) {
            return s;
        }
        let score = match bmdl_score(self.ts, model, self.hyper) {
            Ok(s) => Some(s),
            Err(e) => {
                log::warn!(
                    "rejecting proposal m={}, k={}, p={}: {e}",
                    model.m(),
                    model.k,
                    model.p
                );
                None
            }
        };
        self.cache.insert(model.clone(), score);
        score
    }

    /// One Metropolis-Hastings iteration. Returns whether the proposal was accepted.
    pub fn step(&mut self) -> bool {
        self.iterations += 1;
        let Some(proposal) = self.propose() else {
            return false;
        };
        let candidate = proposal.apply(&self.current);
        if !self.bounds.admits(&candidate)
            || validate_model(&candidate, self.hyper, self.ts.len()).is_err()
        {
            return false;
        }
        let Some(score) = self.score_cached(&candidate) else {
            return false;
        };
        if beats(score, &candidate, self.best_bmdl, &self.best) {
            self.best = candidate.clone();
            self.best_bmdl = score;
        }
        let prob = acceptance_probability(self.current_bmdl, score);
        let accept = prob >= 1.0 || self.rng.random::<f64>() < prob;
        if accept {
            self.current = candidate;
            self.current_bmdl = score;
            self.accepted += 1;
        }
        accept
    }
}

/// Runs a chain from the null model.
pub fn mh_search(
    ts: &TimeSeries,
    hyper: &Hyperparams,
    config: &SearchConfig,
) -> Result<SearchResult> {
    mh_search_from(ts, hyper, config, ChangepointModel::null(ts.len()))
}

/// Runs a chain from `start`.
pub fn mh_search_from(
    ts: &TimeSeries,
    hyper: &Hyperparams,
    config: &SearchConfig,
    start: ChangepointModel,
) -> Result<SearchResult> {
    let mut chain = Chain::new(ts, hyper, config, start)?;
    let n = ts.len();
    let mut eta_counts = vec![0u64; n];
    let mut trace = config
        .record_trace
        .then(|| Vec::with_capacity(config.iterations));
    for iteration in 1..=config.iterations {
        chain.step();
        let (cur, bmdl) = chain.current();
        for &t in cur.changepoints() {
            eta_counts[t - 1] += 1;
        }
        if let Some(trace) = trace.as_mut() {
            trace.push(TraceEntry {
                iteration,
                bmdl,
                m: cur.m(),
                k: cur.k,
                p: cur.p,
            });
        }
    }
    let best = score_model(ts, &chain.best, hyper)?;
    debug_assert_eq!(best.bmdl.to_bits(), chain.best_bmdl.to_bits());
    let iters = config.iterations as f64;
    Ok(SearchResult {
        best,
        visited_count: chain.visited_count(),
        acceptance_rate: chain.acceptance_rate(),
        trace,
        eta_marginals: eta_counts.into_iter().map(|c| c as f64 / iters).collect(),
    })
}

/// Largest bounded model space [`exhaustive_search`] will enumerate.
pub const EXHAUSTIVE_CAP: u128 = 1_000_000;

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Number of `(eta, k, p)` combinations inside `bounds` (before validity checks).
pub fn bounded_model_count(n: usize, hyper: &Hyperparams, bounds: &ModelBounds) -> u128 {
    let bounds = bounds.clamp(hyper);
    let positions = n.saturating_sub(hyper.p_max) as u128;
    let max_m = bounds
        .max_changepoints
        .map_or(positions, |m| (m as u128).min(positions));
    let etas: u128 = (0..=max_m)
        .map(|m| binomial(positions, m))
        .fold(0u128, u128::saturating_add);
    let ks = bounds.k_range.clone().count() as u128;
    let ps = bounds.p_range.clone().count() as u128;
    etas.saturating_mul(ks).saturating_mul(ps)
}

/// Scores every valid model inside `bounds` and returns the best one.
pub fn exhaustive_search(
    ts: &TimeSeries,
    hyper: &Hyperparams,
    bounds: &ModelBounds,
) -> Result<ScoredModel> {
    hyper.validate(ts.period())?;
    ts.check_against(hyper)?;
    let count = bounded_model_count(ts.len(), hyper, bounds);
    if count > EXHAUSTIVE_CAP {
        return Err(BmdlError::TooManyModels {
            count,
            cap: EXHAUSTIVE_CAP,
        });
    }
    let bounds = bounds.clamp(hyper);
    let n = ts.len();
    let positions: Vec<usize> = (hyper.p_max + 1..=n).collect();
    let max_m = bounds
        .max_changepoints
        .unwrap_or(positions.len())
        .min(positions.len());

    let mut best: Option<ScoredModel> = None;
    let mut subset = Vec::with_capacity(max_m);
    let mut visit = |cps: &[usize]| {
        for k in bounds.k_range.clone() {
            for p in bounds.p_range.clone() {
                let model =
                    ChangepointModel::new(n, cps.to_vec(), k, p).expect("positions are in range");
                if validate_model(&model, hyper, n).is_err() {
                    continue;
                }
                if let Ok(scored) = score_model(ts, &model, hyper) {
                    if best.as_ref().is_none_or(|b| scored.is_better_than(b)) {
                        best = Some(scored);
                    }
                }
            }
        }
    };
    enumerate_subsets(&positions, 0, max_m, &mut subset, &mut visit);
    best.ok_or(BmdlError::DegenerateVariance)
}

fn enumerate_subsets(
    positions: &[usize],
    from: usize,
    max_m: usize,
    subset: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    visit(subset);
    if subset.len() == max_m {
        return;
    }
    for i in from..positions.len() {
        subset.push(positions[i]);
        enumerate_subsets(positions, i + 1, max_m, subset, visit);
        subset.pop();
    }
}

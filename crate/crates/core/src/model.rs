// SPDX-License-Identifier: MIT OR Apache-2.0

//! Candidate changepoint models and the design matrices that realize them.
//!
//! Time indices are 1-based throughout, matching the usual statistical
//! notation: `values[0]` is the observation at `t = 1`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{BmdlError, ModelError, Result};
use crate::linalg::Matrix;

/// A calendar month, used to label monthly observations (`YYYY-MM`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CalendarMonth {
    pub year: i32,
    /// 1..=12
    pub month: u32,
}

impl CalendarMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(BmdlError::InvalidSeries(format!(
                "month must be in 1..=12; got {month}"
            )));
        }
        Ok(Self { year, month })
    }

    pub fn add_months(self, months: i64) -> Self {
        let idx = self.year as i64 * 12 + (self.month as i64 - 1) + months;
        Self {
            year: idx.div_euclid(12) as i32,
            month: idx.rem_euclid(12) as u32 + 1,
        }
    }

    /// Number of months from `self` to `other`.
    pub fn months_until(self, other: Self) -> i64 {
        (other.year as i64 * 12 + other.month as i64) - (self.year as i64 * 12 + self.month as i64)
    }
}

impl fmt::Display for CalendarMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for CalendarMonth {
    type Err = BmdlError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || BmdlError::InvalidSeries(format!("expected a YYYY-MM date; got {s:?}"));
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        // tolerate a trailing day component (YYYY-MM-DD)
        let m = m.split('-').next().ok_or_else(bad)?;
        let year = y.parse::<i32>().map_err(|_| bad())?;
        let month = m.parse::<u32>().map_err(|_| bad())?;
        Self::new(year, month).map_err(|_| bad())
    }
}

impl Serialize for CalendarMonth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CalendarMonth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An observed, complete, equally spaced univariate series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    period: usize,
    start_label: Option<CalendarMonth>,
}

impl TimeSeries {
    /// Rejects non-finite values and a zero period. Missing observations are
    /// not imputed.
    pub fn new(values: Vec<f64>, period: usize) -> Result<Self> {
        if period == 0 {
            return Err(BmdlError::InvalidSeries("period must be >= 1".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(BmdlError::InvalidSeries(format!(
                "value at t={} is not finite ({})",
                i + 1,
                values[i]
            )));
        }
        Ok(Self {
            values,
            period,
            start_label: None,
        })
    }

    pub fn with_start_label(mut self, label: CalendarMonth) -> Self {
        self.start_label = Some(label);
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn start_label(&self) -> Option<CalendarMonth> {
        self.start_label
    }

    /// Observation at 1-based time `t`.
    pub fn at(&self, t: usize) -> f64 {
        self.values[t - 1]
    }

    /// The first `len` observations as a new series with the same labels.
    pub fn prefix(&self, len: usize) -> Self {
        Self {
            values: self.values[..len.min(self.values.len())].to_vec(),
            period: self.period,
            start_label: self.start_label,
        }
    }

    /// Calendar label of time `t`, available for monthly series with a start label.
    pub fn label(&self, t: usize) -> Option<String> {
        match (self.start_label, self.period) {
            (Some(start), 12) => Some(start.add_months(t as i64 - 1).to_string()),
            _ => None,
        }
    }

    /// Checks that at least one nontrivial model fits this series under `hyper`.
    pub fn check_against(&self, hyper: &Hyperparams) -> Result<()> {
        let needed = hyper.p_max + 2 * hyper.min_regime_length;
        if self.len() < needed {
            return Err(BmdlError::InsufficientData {
                needed,
                available: self.len(),
            });
        }
        Ok(())
    }
}

/// Prior variance scale `nu` of the model-specific coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorScale {
    /// `nu = n`, the length of the series being scored.
    SeriesLength,
    Fixed(f64),
}

impl PriorScale {
    pub fn value(self, n: usize) -> f64 {
        match self {
            Self::SeriesLength => n as f64,
            Self::Fixed(v) => v,
        }
    }
}

/// Prior hyperparameters and model-space bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub nu: PriorScale,
    /// Beta(a, b) prior on the changepoint probability.
    pub a: f64,
    pub b: f64,
    pub k_max: usize,
    pub p_max: usize,
    pub min_regime_length: usize,
}

impl Hyperparams {
    pub const DEFAULT_A: f64 = 1.0;
    pub const DEFAULT_B: f64 = 19.0;
    pub const DEFAULT_P_MAX: usize = 5;
    pub const DEFAULT_MIN_REGIME: usize = 2;

    /// Largest harmonic order that keeps the seasonal regressors nonsingular.
    pub fn max_harmonic_order(period: usize) -> usize {
        period.saturating_sub(1) / 2
    }

    /// Defaults for a series with seasonal period `period`.
    pub fn for_period(period: usize) -> Self {
        Self {
            nu: PriorScale::SeriesLength,
            a: Self::DEFAULT_A,
            b: Self::DEFAULT_B,
            k_max: Self::max_harmonic_order(period),
            p_max: Self::DEFAULT_P_MAX,
            min_regime_length: Self::DEFAULT_MIN_REGIME,
        }
    }

    pub fn validate(&self, period: usize) -> Result<()> {
        let bad = |msg: String| Err(BmdlError::InvalidHyperparams(msg));
        match self.nu {
            PriorScale::Fixed(v) if !(v.is_finite() && v > 0.0) => {
                return bad(format!("nu must be finite and > 0; got {v}"))
            }
            _ => {}
        }
        if !(self.a.is_finite() && self.a > 0.0) {
            return bad(format!("a must be finite and > 0; got {}", self.a));
        }
        if !(self.b.is_finite() && self.b > 0.0) {
            return bad(format!("b must be finite and > 0; got {}", self.b));
        }
        let limit = Self::max_harmonic_order(period);
        if self.k_max > limit {
            return bad(format!(
                "k_max={} exceeds floor((T-1)/2)={limit} for period T={period}",
                self.k_max
            ));
        }
        if self.min_regime_length == 0 {
            return bad("min_regime_length must be >= 1".into());
        }
        Ok(())
    }
}

/// A candidate model: changepoint configuration `eta`, harmonic order `k`
/// and AR order `p`.
///
/// `eta` is stored sparsely as the sorted list of changepoint times.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChangepointModel {
    n: usize,
    changepoints: Vec<usize>,
    pub k: usize,
    pub p: usize,
}

impl ChangepointModel {
    /// No changepoints, no seasonality, independent errors.
    pub fn null(n: usize) -> Self {
        Self {
            n,
            changepoints: Vec::new(),
            k: 0,
            p: 0,
        }
    }

    pub fn new(n: usize, mut changepoints: Vec<usize>, k: usize, p: usize) -> Result<Self> {
        changepoints.sort_unstable();
        changepoints.dedup();
        if let Some(&t) = changepoints.iter().find(|&&t| t == 0 || t > n) {
            return Err(ModelError::ChangepointOutOfRange { t, n }.into());
        }
        Ok(Self {
            n,
            changepoints,
            k,
            p,
        })
    }

    /// Builds a model from a dense 0/1 indicator vector (`eta[0]` is `t = 1`).
    pub fn from_eta(eta: &[bool], k: usize, p: usize) -> Self {
        let changepoints = eta
            .iter()
            .enumerate()
            .filter_map(|(i, &on)| on.then_some(i + 1))
            .collect();
        Self {
            n: eta.len(),
            changepoints,
            k,
            p,
        }
    }

    pub fn with_k(&self, k: usize) -> Self {
        Self { k, ..self.clone() }
    }

    pub fn with_p(&self, p: usize) -> Self {
        Self { p, ..self.clone() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of changepoints `m`.
    pub fn m(&self) -> usize {
        self.changepoints.len()
    }

    /// Changepoint times `tau_1 < ... < tau_m`.
    pub fn changepoints(&self) -> &[usize] {
        &self.changepoints
    }

    pub fn eta(&self) -> Vec<bool> {
        let mut eta = vec![false; self.n];
        for &t in &self.changepoints {
            eta[t - 1] = true;
        }
        eta
    }

    pub fn is_changepoint(&self, t: usize) -> bool {
        self.changepoints.binary_search(&t).is_ok()
    }

    /// Toggles `eta_t`.
    pub fn flip(&self, t: usize) -> Self {
        assert!(
            t >= 1 && t <= self.n,
            "flip position {t} outside 1..={}",
            self.n
        );
        let mut next = self.clone();
        match next.changepoints.binary_search(&t) {
            Ok(i) => {
                next.changepoints.remove(i);
            }
            Err(i) => next.changepoints.insert(i, t),
        }
        next
    }

    /// The same configuration on a series extended to length `n` (new times
    /// are not changepoints).
    pub fn extended_to(&self, n: usize) -> Self {
        assert!(n >= self.n);
        Self { n, ..self.clone() }
    }

    /// Number of model-specific coefficients, `2m + 2k`.
    pub fn num_increments(&self) -> usize {
        2 * self.m() + 2 * self.k
    }

    /// Regime of time `t` (1-based): the number of changepoints at or before `t`, plus one.
    pub fn regime_of(&self, t: usize) -> usize {
        self.changepoints.partition_point(|&tau| tau <= t) + 1
    }

    /// Regimes as inclusive `(start, end)` ranges over `first..=n`.
    pub fn regime_bounds(&self, first: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.m() + 1);
        let mut start = first;
        for &tau in &self.changepoints {
            out.push((start, tau - 1));
            start = tau;
        }
        out.push((start, self.n));
        out
    }
}

/// Checks every admissibility constraint of `model` for a series of length `n`.
pub fn validate_model(
    model: &ChangepointModel,
    hyper: &Hyperparams,
    n: usize,
) -> Result<(), ModelError> {
    if model.n != n {
        return Err(ModelError::LengthMismatch {
            model_n: model.n,
            n,
        });
    }
    if let Some(&t) = model.changepoints.iter().find(|&&t| t == 0 || t > n) {
        return Err(ModelError::ChangepointOutOfRange { t, n });
    }
    if let Some(&t) = model.changepoints.first() {
        if t <= hyper.p_max {
            return Err(ModelError::EarlyChangepoint {
                t,
                p_max: hyper.p_max,
            });
        }
    }
    if model.k > hyper.k_max {
        return Err(ModelError::HarmonicOrderOutOfRange {
            k: model.k,
            k_max: hyper.k_max,
        });
    }
    if model.p > hyper.p_max {
        return Err(ModelError::ArOrderOutOfRange {
            p: model.p,
            p_max: hyper.p_max,
        });
    }
    // regime 1 is measured over the rows that enter the fit
    for (r, (start, end)) in model.regime_bounds(hyper.p_max + 1).into_iter().enumerate() {
        let len = (end + 1).saturating_sub(start);
        if len < hyper.min_regime_length {
            return Err(ModelError::RegimeTooShort {
                regime: r + 1,
                len,
                min: hyper.min_regime_length,
            });
        }
    }
    Ok(())
}

/// Regime index of time `t` under the indicator vector `eta`.
pub fn regime_index(eta: &[bool], t: usize) -> usize {
    assert!(t >= 1 && t <= eta.len(), "t={t} outside 1..={}", eta.len());
    1 + eta[..t].iter().filter(|&&on| on).count()
}

/// Baseline (`Z`) and model-specific (`D`) regressors over rows
/// `first_row..=last_row`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrices {
    pub first_row: usize,
    pub last_row: usize,
    /// Columns: intercept, t.
    pub z: Matrix,
    /// Columns: (indicator, indicator * t) for regimes 2..=m+1, then
    /// (sin, cos) for harmonics 1..=k.
    pub d: Matrix,
}

impl DesignMatrices {
    pub fn row_index(&self, t: usize) -> usize {
        assert!(t >= self.first_row && t <= self.last_row);
        t - self.first_row
    }

    /// `row_t(Z) s + row_t(D) mu`.
    pub fn mean_at(&self, t: usize, s: &[f64; 2], mu: &[f64]) -> f64 {
        let i = self.row_index(t);
        let base = s[0] * self.z.get(i, 0) + s[1] * self.z.get(i, 1);
        base + (0..self.d.ncols())
            .map(|j| self.d.get(i, j) * mu[j])
            .sum::<f64>()
    }
}

/// Seasonal regressors `(sin(2 pi t i / T), cos(2 pi t i / T))` at time `t`.
pub fn harmonic_terms(t: usize, i: usize, period: usize) -> (f64, f64) {
    let angle = 2.0 * PI * ((t * i) % period) as f64 / period as f64;
    angle.sin_cos()
}

/// Builds the design over rows `p_max+1..=n`.
pub fn build_design(
    model: &ChangepointModel,
    n: usize,
    period: usize,
    p_max: usize,
) -> DesignMatrices {
    design_over(model, period, p_max + 1, n)
}

/// Builds the design over an arbitrary row range `first..=last`.
pub fn design_over(
    model: &ChangepointModel,
    period: usize,
    first: usize,
    last: usize,
) -> DesignMatrices {
    let rows = (last + 1).saturating_sub(first);
    let mut z = Matrix::zeros(rows, 2);
    for (i, t) in (first..=last).enumerate() {
        z.set(i, 0, 1.0);
        z.set(i, 1, t as f64);
    }
    let mut d = Matrix::zeros(rows, model.num_increments());
    let cps = model.changepoints();
    for (r, &start) in cps.iter().enumerate() {
        let end = cps.get(r + 1).map_or(model.n(), |&next| next - 1);
        let lo = start.max(first);
        let hi = end.min(last);
        for t in lo..=hi {
            let i = t - first;
            d.set(i, 2 * r, 1.0);
            d.set(i, 2 * r + 1, t as f64);
        }
    }
    let offset = 2 * model.m();
    for h in 1..=model.k {
        for (i, t) in (first..=last).enumerate() {
            let (sin, cos) = harmonic_terms(t, h, period);
            d.set(i, offset + 2 * (h - 1), sin);
            d.set(i, offset + 2 * (h - 1) + 1, cos);
        }
    }
    DesignMatrices {
        first_row: first,
        last_row: last,
        z,
        d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hyper(p_max: usize, period: usize) -> Hyperparams {
        Hyperparams {
            p_max,
            ..Hyperparams::for_period(period)
        }
    }

    #[test]
    fn null_model_is_valid() {
        let m = ChangepointModel::null(100);
        assert!(validate_model(&m, &hyper(5, 12), 100).is_ok());
    }

    #[test]
    fn early_changepoint_rejected() {
        let m = ChangepointModel::new(100, vec![2], 0, 0).unwrap();
        let err = validate_model(&m, &hyper(5, 12), 100).unwrap_err();
        assert_eq!(err, ModelError::EarlyChangepoint { t: 2, p_max: 5 });
        assert!(err
            .to_string()
            .contains("changepoint within first p_max times"));
    }

    #[test]
    fn harmonic_order_bounded_by_period() {
        assert_eq!(Hyperparams::max_harmonic_order(12), 5);
        let h = hyper(5, 12);
        let m = ChangepointModel {
            k: 6,
            ..ChangepointModel::null(100)
        };
        assert_eq!(
            validate_model(&m, &h, 100),
            Err(ModelError::HarmonicOrderOutOfRange { k: 6, k_max: 5 })
        );
        let too_big = Hyperparams { k_max: 6, ..h };
        assert!(too_big.validate(12).is_err());
    }

    #[test]
    fn ar_order_and_regime_length_checked() {
        let h = hyper(5, 12);
        let m = ChangepointModel {
            p: 6,
            ..ChangepointModel::null(100)
        };
        assert!(matches!(
            validate_model(&m, &h, 100),
            Err(ModelError::ArOrderOutOfRange { .. })
        ));
        // last regime {100} has one point
        let m = ChangepointModel::new(100, vec![100], 0, 0).unwrap();
        assert!(matches!(
            validate_model(&m, &h, 100),
            Err(ModelError::RegimeTooShort {
                regime: 2,
                len: 1,
                ..
            })
        ));
        // regime 1 is rows 6..=6
        let m = ChangepointModel::new(100, vec![7], 0, 0).unwrap();
        assert!(matches!(
            validate_model(&m, &h, 100),
            Err(ModelError::RegimeTooShort { regime: 1, .. })
        ));
        let m = ChangepointModel::new(100, vec![8, 99], 0, 0).unwrap();
        assert!(validate_model(&m, &h, 100).is_ok());
    }

    #[test]
    fn regime_index_examples() {
        assert_eq!(regime_index(&[false; 10], 7), 1);
        let mut eta = vec![false; 10];
        eta[5] = true; // tau = 6
        assert_eq!(regime_index(&eta, 5), 1);
        assert_eq!(regime_index(&eta, 6), 2);
        let m = ChangepointModel::new(10, vec![4, 8], 0, 0).unwrap();
        assert_eq!(regime_index(&m.eta(), 9), 3);
        assert_eq!(m.regime_of(9), 3);
        assert_eq!(m.regime_of(3), 1);
        assert_eq!(m.regime_of(4), 2);
    }

    #[test]
    fn design_examples() {
        let null = ChangepointModel::null(100);
        let d = build_design(&null, 100, 12, 5);
        assert_eq!(d.d.ncols(), 0);
        assert_eq!(d.z.nrows(), 95);
        assert_eq!(d.z.row(d.row_index(10)), vec![1.0, 10.0]);

        let one = ChangepointModel::new(100, vec![60], 0, 0).unwrap();
        let d = build_design(&one, 100, 12, 5);
        assert_eq!(d.d.row(d.row_index(59)), vec![0.0, 0.0]);
        assert_eq!(d.d.row(d.row_index(60)), vec![1.0, 60.0]);

        let seasonal = ChangepointModel {
            k: 1,
            ..ChangepointModel::null(100)
        };
        let d = build_design(&seasonal, 100, 12, 0);
        let row = d.d.row(d.row_index(3));
        assert!((row[0] - 1.0).abs() < 1e-15);
        assert!(row[1].abs() < 1e-15);
    }

    #[test]
    fn design_column_order() {
        let m = ChangepointModel::new(50, vec![20, 35], 2, 0).unwrap();
        let d = build_design(&m, 50, 12, 5);
        assert_eq!(d.d.ncols(), 8);
        // regime 2 is 20..=34, regime 3 is 35..=50
        let r = d.d.row(d.row_index(34));
        assert_eq!(&r[..4], &[1.0, 34.0, 0.0, 0.0]);
        let r = d.d.row(d.row_index(35));
        assert_eq!(&r[..4], &[0.0, 0.0, 1.0, 35.0]);
        let (s2, c2) = harmonic_terms(35, 2, 12);
        assert_eq!(&r[6..], &[s2, c2]);
    }

    #[test]
    fn calendar_months() {
        let m: CalendarMonth = "2011-01".parse().unwrap();
        assert_eq!(m.add_months(28).to_string(), "2013-05");
        assert_eq!(m.months_until("2013-05".parse().unwrap()), 28);
        assert!("2011-13".parse::<CalendarMonth>().is_err());
        assert!("abc".parse::<CalendarMonth>().is_err());
        let ts = TimeSeries::new(vec![0.0; 40], 12)
            .unwrap()
            .with_start_label(m);
        assert_eq!(ts.label(29).as_deref(), Some("2013-05"));
    }

    #[test]
    fn series_rejects_non_finite() {
        assert!(TimeSeries::new(vec![1.0, f64::NAN], 12).is_err());
        assert!(TimeSeries::new(vec![1.0], 0).is_err());
    }

    fn arb_model() -> impl Strategy<Value = ChangepointModel> {
        (20usize..120, 0usize..=5, 0usize..=5)
            .prop_flat_map(|(n, k, p)| {
                (
                    Just(n),
                    proptest::collection::btree_set(6usize..=n, 0..6),
                    Just(k),
                    Just(p),
                )
            })
            .prop_map(|(n, cps, k, p)| {
                ChangepointModel::new(n, cps.into_iter().collect(), k, p).unwrap()
            })
    }

    proptest! {
        #[test]
        fn regimes_partition_time(model in arb_model()) {
            let eta = model.eta();
            let mut prev = 1;
            for t in 1..=model.n() {
                let r = regime_index(&eta, t);
                prop_assert_eq!(r, model.regime_of(t));
                prop_assert!(r >= prev);
                prev = r;
                // partition rule with tau_0 = 1, tau_{m+1} = n + 1
                let mut taus = vec![1];
                taus.extend_from_slice(model.changepoints());
                taus.push(model.n() + 1);
                prop_assert!(taus[r - 1] <= t && t < taus[r]);
            }
        }

        #[test]
        fn design_shape_and_periodicity(model in arb_model()) {
            let n = model.n();
            let d = build_design(&model, n, 12, 5);
            prop_assert_eq!(d.d.ncols(), 2 * model.m() + 2 * model.k);
            if let Some(&t) = model.changepoints().first() {
                let fewer = model.flip(t);
                let d2 = build_design(&fewer, n, 12, 5);
                prop_assert_eq!(d.d.ncols() - d2.d.ncols(), 2);
            }
            let off = 2 * model.m();
            for t in 6..=n.saturating_sub(12) {
                for j in off..d.d.ncols() {
                    let a = d.d.get(d.row_index(t), j);
                    let b = d.d.get(d.row_index(t + 12), j);
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn fitted_mean_matches_components(
            model in arb_model(),
            coef in proptest::collection::vec(-5.0f64..5.0, 40),
        ) {
            let n = model.n();
            let d = build_design(&model, n, 12, 5);
            let s = [coef[0], coef[1]];
            let q = model.num_increments();
            let mu = &coef[2..2 + q];
            for t in 6..=n {
                let r = model.regime_of(t);
                let mut expected = s[0] + s[1] * t as f64;
                if r > 1 {
                    expected += mu[2 * (r - 2)] + mu[2 * (r - 2) + 1] * t as f64;
                }
                for i in 1..=model.k {
                    let (sin, cos) = harmonic_terms(t, i, 12);
                    let base = 2 * model.m() + 2 * (i - 1);
                    expected += mu[base] * sin + mu[base + 1] * cos;
                }
                let got = d.mean_at(t, &s, mu);
                prop_assert!((got - expected).abs() < 1e-9 * (1.0 + expected.abs()));
            }
        }
    }
}

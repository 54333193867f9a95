// SPDX-License-Identifier: MIT OR Apache-2.0

//! User-facing description of a selected model.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{harmonic_terms, ChangepointModel, Hyperparams, TimeSeries};
use crate::scoring::{score_model, ScoredModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangepointLabel {
    pub t: usize,
    pub label: Option<String>,
}

/// One regime's linear segment, `intercept + slope * t` over `start..=end`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub intercept: f64,
    pub slope: f64,
}

impl Segment {
    pub fn line(&self, t: usize) -> f64 {
        self.intercept + self.slope * t as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeasonalPart {
    pub k: usize,
    /// `(theta_i1, theta_i2)` for `i = 1..=k` (sin, cos).
    pub theta: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArPart {
    pub p: usize,
    pub phi: Vec<f64>,
}

/// One row of plot data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedPoint {
    pub t: usize,
    pub label: Option<String>,
    pub observed: f64,
    pub linear_fit: f64,
    pub linear_plus_seasonal_fit: f64,
    pub regime: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub series: String,
    pub changepoints: Vec<ChangepointLabel>,
    pub segments: Vec<Segment>,
    pub seasonal: SeasonalPart,
    pub ar: ArPart,
    pub sigma2: f64,
    pub bmdl: f64,
    /// Plot data for every `t = 1..=n`; regime 1's line is extended back over
    /// the conditioning observations. Emitted separately from the JSON summary.
    #[serde(skip)]
    pub fitted: Vec<FittedPoint>,
}

impl FitResult {
    pub fn named(mut self, series: impl Into<String>) -> Self {
        self.series = series.into();
        self
    }

    /// Seasonal component at time `t`.
    pub fn harmonic_at(&self, t: usize, period: usize) -> f64 {
        self.seasonal
            .theta
            .iter()
            .enumerate()
            .map(|(i, [a, b])| {
                let (sin, cos) = harmonic_terms(t, i + 1, period);
                a * sin + b * cos
            })
            .sum()
    }

    /// Multi-line human-readable summary, coefficients rounded to 4 decimals.
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        let name = if self.series.is_empty() {
            "series"
        } else {
            &self.series
        };
        out.push_str(&format!(
            "{name}: {} changepoint(s)",
            self.changepoints.len()
        ));
        for cp in &self.changepoints {
            match &cp.label {
                Some(l) => out.push_str(&format!(" t={} ({l})", cp.t)),
                None => out.push_str(&format!(" t={}", cp.t)),
            }
        }
        out.push('\n');
        for (r, seg) in self.segments.iter().enumerate() {
            let sign = if seg.slope < 0.0 { '-' } else { '+' };
            out.push_str(&format!(
                "  regime {}: t={}..{}  {:.4} {sign} {:.4} t\n",
                r + 1,
                seg.start,
                seg.end,
                seg.intercept,
                seg.slope.abs()
            ));
        }
        out.push_str(&format!("  harmonic order k={}", self.seasonal.k));
        for (i, [a, b]) in self.seasonal.theta.iter().enumerate() {
            out.push_str(&format!("  theta{}=({a:.4}, {b:.4})", i + 1));
        }
        out.push('\n');
        out.push_str(&format!("  AR order p={}", self.ar.p));
        if !self.ar.phi.is_empty() {
            let phi: Vec<String> = self.ar.phi.iter().map(|v| format!("{v:.4}")).collect();
            out.push_str(&format!("  phi=({})", phi.join(", ")));
        }
        out.push_str(&format!(
            "\n  sigma2={:.4}  bmdl={:.4}\n",
            self.sigma2, self.bmdl
        ));
        out
    }
}

/// Profiles `model` on `ts` and assembles the report.
pub fn fit_report(
    ts: &TimeSeries,
    model: &ChangepointModel,
    hyper: &Hyperparams,
) -> Result<FitResult> {
    let scored = score_model(ts, model, hyper)?;
    Ok(report_from_scored(ts, &scored, hyper))
}

/// Builds the report for an already scored model.
pub fn report_from_scored(ts: &TimeSeries, scored: &ScoredModel, hyper: &Hyperparams) -> FitResult {
    let model = &scored.model;
    let [a1, b1] = scored.s_hat;
    let segments: Vec<Segment> = model
        .regime_bounds(hyper.p_max + 1)
        .into_iter()
        .enumerate()
        .map(|(r, (start, end))| {
            let (da, db) = if r == 0 {
                (0.0, 0.0)
            } else {
                (scored.mu_hat[2 * (r - 1)], scored.mu_hat[2 * (r - 1) + 1])
            };
            Segment {
                start,
                end,
                intercept: a1 + da,
                slope: b1 + db,
            }
        })
        .collect();
    let offset = 2 * model.m();
    let theta: Vec<[f64; 2]> = (0..model.k)
        .map(|i| {
            [
                scored.mu_hat[offset + 2 * i],
                scored.mu_hat[offset + 2 * i + 1],
            ]
        })
        .collect();

    let mut result = FitResult {
        series: String::new(),
        changepoints: model
            .changepoints()
            .iter()
            .map(|&t| ChangepointLabel {
                t,
                label: ts.label(t),
            })
            .collect(),
        segments,
        seasonal: SeasonalPart { k: model.k, theta },
        ar: ArPart {
            p: model.p,
            phi: scored.phi_hat.clone(),
        },
        sigma2: scored.sigma2_hat,
        bmdl: scored.bmdl,
        fitted: Vec::new(),
    };
    result.fitted = (1..=ts.len())
        .map(|t| {
            let regime = model.regime_of(t);
            let linear = result.segments[regime - 1].line(t);
            FittedPoint {
                t,
                label: ts.label(t),
                observed: ts.at(t),
                linear_fit: linear,
                linear_plus_seasonal_fit: linear + result.harmonic_at(t, ts.period()),
                regime,
            }
        })
        .collect();
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_design, CalendarMonth};
    use crate::scoring::profile_fit;
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

    #[test]
    fn recovers_exact_line() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<f64> = (1..=100)
            .map(|t| {
                2.0 + 0.5 * t as f64
                    + 1e-6 * {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        e
                    }
            })
            .collect();
        let ts = TimeSeries::new(v, 12).unwrap();
        let hyper = Hyperparams::for_period(12);
        let fit = fit_report(&ts, &ChangepointModel::null(100), &hyper).unwrap();
        assert_eq!(fit.segments.len(), 1);
        assert!((fit.segments[0].intercept - 2.0).abs() < 1e-3);
        assert!((fit.segments[0].slope - 0.5).abs() < 1e-5);
    }

    #[test]
    fn segments_tile_and_match_design() {
        let ts = series(3, 150, |t| {
            let base = if t >= 70 {
                5.0 + 0.1 * t as f64
            } else {
                0.02 * t as f64
            };
            base + 3.0 * (2.0 * std::f64::consts::PI * t as f64 / 12.0).sin()
        });
        let hyper = Hyperparams::for_period(12);
        let model = ChangepointModel::new(150, vec![70, 120], 2, 1).unwrap();
        let fit = fit_report(&ts, &model, &hyper).unwrap();
        assert_eq!(fit.segments.len(), model.m() + 1);
        assert_eq!(fit.segments[0].start, hyper.p_max + 1);
        assert_eq!(fit.segments.last().unwrap().end, 150);
        for pair in fit.segments.windows(2) {
            assert_eq!(pair[0].end + 1, pair[1].start);
        }

        let prof = profile_fit(&ts, &model, &hyper).unwrap();
        let design = build_design(&model, 150, 12, hyper.p_max);
        for t in hyper.p_max + 1..=150 {
            let pt = &fit.fitted[t - 1];
            let want = design.mean_at(t, &prof.s_hat, &prof.mu_hat);
            assert!((pt.linear_plus_seasonal_fit - want).abs() < 1e-8, "t={t}");
            let seasonal = pt.linear_plus_seasonal_fit - pt.linear_fit;
            assert!((seasonal - fit.harmonic_at(t, 12)).abs() < 1e-12);
        }
    }

    #[test]
    fn no_seasonality_means_identical_fits() {
        let ts = series(4, 80, |t| 0.1 * t as f64);
        let hyper = Hyperparams::for_period(12);
        let fit = fit_report(
            &ts,
            &ChangepointModel::new(80, vec![40], 0, 2).unwrap(),
            &hyper,
        )
        .unwrap();
        assert!(fit
            .fitted
            .iter()
            .all(|p| p.linear_fit == p.linear_plus_seasonal_fit));
        assert_eq!(fit.ar.phi.len(), 2);
    }

    #[test]
    fn monthly_labels_and_json_schema() {
        let start: CalendarMonth = "2011-01".parse().unwrap();
        let ts = series(5, 82, |t| if t >= 29 { 4.0 } else { 0.0 }).with_start_label(start);
        let hyper = Hyperparams::for_period(12);
        let fit = fit_report(
            &ts,
            &ChangepointModel::new(82, vec![29], 1, 0).unwrap(),
            &hyper,
        )
        .unwrap()
        .named("seattle");
        assert_eq!(fit.changepoints[0].label.as_deref(), Some("2013-05"));
        let json = serde_json::to_value(&fit).unwrap();
        for key in [
            "series",
            "changepoints",
            "segments",
            "seasonal",
            "ar",
            "sigma2",
            "bmdl",
        ] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert!(json.get("fitted").is_none());
        assert_eq!(json["changepoints"][0]["t"], 29);
        assert_eq!(json["seasonal"]["k"], 1);
        assert!(fit.summary_text().contains("2013-05"));
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded end-to-end behavior of search and monitoring.

use bmdl_core::simulate::{run_study, standard_grid, Method, StudySettings};
use bmdl_core::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn noisy(seed: u64, n: usize, f: impl Fn(usize) -> f64) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (1..=n)
        .map(|t| {
            let e: f64 = StandardNormal.sample(&mut rng);
            f(t) + e
        })
        .collect();
    TimeSeries::new(v, 12).unwrap()
}

#[test]
fn white_noise_mostly_yields_no_changepoints() {
    let hyper = Hyperparams::for_period(12);
    let clean = (0..20)
        .filter(|&seed| {
            let ts = noisy(300 + seed, 150, |_| 0.0);
            let config = SearchConfig {
                iterations: 20_000,
                seed,
                ..SearchConfig::default()
            };
            mh_search(&ts, &hyper, &config).unwrap().best.model.m() == 0
        })
        .count();
    assert!(clean >= 16, "{clean}/20");
}

#[test]
fn strong_step_located_within_two() {
    let hyper = Hyperparams::for_period(12);
    let hits = (0..20)
        .filter(|&seed| {
            let ts = noisy(400 + seed, 200, |t| if t >= 60 { 8.0 } else { 0.0 });
            let config = SearchConfig {
                seed,
                ..SearchConfig::default()
            };
            let best = mh_search(&ts, &hyper, &config).unwrap().best;
            best.model
                .changepoints()
                .iter()
                .any(|t| (58..=62).contains(t))
        })
        .count();
    assert!(hits >= 19, "{hits}/20");
}

#[test]
fn null_series_monitoring_rarely_detects() {
    let hyper = Hyperparams::for_period(12);
    let detections = (0..5)
        .filter(|&seed| {
            let ts = noisy(500 + seed, 200, |_| 0.0);
            let config = MonitorConfig::new(60, seed);
            monitor_series(&ts, &hyper, &config, None).unwrap().detected
        })
        .count();
    assert!(detections <= 2, "{detections}/5");
}

#[test]
fn monitoring_strong_step_run_lengths() {
    let ts = noisy(7, 120, |t| if t >= 60 { 10.0 } else { 0.0 });
    // a changepoint at the newest point needs single-point regimes
    let hyper = Hyperparams {
        min_regime_length: 1,
        ..Hyperparams::for_period(12)
    };
    let outcome = monitor_series(&ts, &hyper, &MonitorConfig::new(60, 1), Some(60)).unwrap();
    assert_eq!(outcome.detection_time, Some(60));
    assert_eq!(outcome.run_length, Some(0));
    assert_eq!(outcome.detected_changepoints, vec![60]);

    let hyper = Hyperparams::for_period(12);
    let outcome = monitor_series(&ts, &hyper, &MonitorConfig::new(60, 1), Some(60)).unwrap();
    assert_eq!(outcome.detection_time, Some(61));
    assert_eq!(outcome.run_length, Some(1));
    assert_eq!(outcome.detected_changepoints, vec![60]);
}

#[test]
fn exhaustive_and_chain_scores_agree_bitwise() {
    let ts = noisy(8, 30, |t| if t >= 15 { 3.0 } else { 0.0 });
    let hyper = Hyperparams {
        p_max: 2,
        k_max: 1,
        ..Hyperparams::for_period(12)
    };
    let bounds = ModelBounds {
        max_changepoints: Some(1),
        k_range: 0..=1,
        p_range: 0..=1,
    };
    let oracle = exhaustive_search(&ts, &hyper, &bounds).unwrap();
    let rescored = bmdl_score(&ts, &oracle.model, &hyper).unwrap();
    assert_eq!(oracle.bmdl.to_bits(), rescored.to_bits());
}

#[test]
fn study_changing_reps_keeps_earlier_realizations() {
    let grid: Vec<_> = standard_grid(0.3, 100).into_iter().take(2).collect();
    let mut settings = StudySettings::for_period(12);
    settings.monitor.search.iterations = 500;
    settings.monitor.iteration_cap = 1_000;
    let methods = [Method::Shewhart, Method::Bmdl];
    let two = run_study(&grid, 2, &methods, 3, &settings).unwrap();
    let three = run_study(&grid, 3, &methods, 3, &settings).unwrap();
    for rec in &two.records {
        assert!(three.records.contains(rec), "{rec:?}");
    }
    for s in &three.summaries {
        assert!((0.0..=1.0).contains(&s.detection_rate));
    }
}

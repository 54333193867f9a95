// SPDX-License-Identifier: MIT OR Apache-2.0

//! AR(p) error estimation and prewhitening.
//!
//! Coefficients follow the convention `e_t = sum_j phi_j e_{t-j} + z_t`.
//! Fitting uses Burg's recursion, whose reflection coefficients are bounded by
//! one in magnitude, so every fit is stationary and the whitening filter is
//! stable.

use serde::{Deserialize, Serialize};

use crate::error::{BmdlError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArFit {
    pub phi: Vec<f64>,
    pub innovation_variance: f64,
}

impl ArFit {
    pub fn order(&self) -> usize {
        self.phi.len()
    }
}

/// Fits an AR(`p`) model to `residuals` with Burg's method.
pub fn estimate_ar(residuals: &[f64], p: usize) -> Result<ArFit> {
    let n = residuals.len();
    if n <= p {
        return Err(BmdlError::ArEstimation(format!(
            "need more than p={p} residuals; got {n}"
        )));
    }
    let energy: f64 = residuals.iter().map(|x| x * x).sum();
    if !(energy > 0.0) || !energy.is_finite() {
        return Err(BmdlError::ArEstimation("residual variance is zero".into()));
    }
    let mut variance = energy / n as f64;
    if p == 0 {
        return Ok(ArFit {
            phi: Vec::new(),
            innovation_variance: variance,
        });
    }

    // prediction-error polynomial a(z) = 1 + a_1 z + ... + a_p z^p
    let mut a = vec![0.0; p + 1];
    a[0] = 1.0;
    let mut forward = residuals.to_vec();
    let mut backward = residuals.to_vec();
    for order in 1..=p {
        let mut num = 0.0;
        let mut den = 0.0;
        for t in order..n {
            num += forward[t] * backward[t - 1];
            den += forward[t] * forward[t] + backward[t - 1] * backward[t - 1];
        }
        let reflection = if den > 0.0 { -2.0 * num / den } else { 0.0 };

        let prev = a.clone();
        for i in 1..=order {
            a[i] = prev[i] + reflection * prev[order - i];
        }
        // update errors from the top down so backward[t - 1] is still the old value
        for t in (order..n).rev() {
            let f = forward[t];
            let b = backward[t - 1];
            forward[t] = f + reflection * b;
            backward[t] = b + reflection * f;
        }
        variance *= 1.0 - reflection * reflection;
    }

    Ok(ArFit {
        phi: a[1..].iter().map(|c| -c).collect(),
        innovation_variance: variance,
    })
}

/// Applies the AR filter `x_t - sum_j phi_j x_{t-j}` for `t = p_max+1..=n`.
///
/// `x[0]` is time 1. The first `p_max` observations only provide lags.
pub fn whiten(x: &[f64], phi: &[f64], p_max: usize) -> Vec<f64> {
    assert!(
        phi.len() <= p_max,
        "AR order {} exceeds the {p_max} conditioning observations",
        phi.len()
    );
    (p_max..x.len())
        .map(|i| {
            phi.iter()
                .enumerate()
                .fold(x[i], |acc, (j, c)| acc - c * x[i - j - 1])
        })
        .collect()
}

/// Sample autocorrelation at `lag` (mean-removed, biased normalization).
pub fn autocorrelation(x: &[f64], lag: usize) -> f64 {
    let n = x.len();
    if lag >= n {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    if var == 0.0 {
        return 0.0;
    }
    let cov: f64 = (lag..n).map(|t| (x[t] - mean) * (x[t - lag] - mean)).sum();
    cov / var
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn ar_path(phi: &[f64], innovations: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(innovations.len());
        for (t, z) in innovations.iter().enumerate() {
            let mut v = *z;
            for (j, c) in phi.iter().enumerate() {
                if t > j {
                    v += c * x[t - j - 1];
                }
            }
            x.push(v);
        }
        x
    }

    fn normals(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn order_zero_is_empty() {
        let fit = estimate_ar(&[1.0, -2.0, 0.5], 0).unwrap();
        assert!(fit.phi.is_empty());
        assert!((fit.innovation_variance - 5.25 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_short_or_constant_input() {
        assert!(estimate_ar(&[1.0, 2.0], 2).is_err());
        assert!(estimate_ar(&[0.0; 10], 1).is_err());
    }

    #[test]
    fn recovers_ar1_coefficient() {
        let x = ar_path(&[0.5], &normals(7, 500));
        let fit = estimate_ar(&x, 1).unwrap();
        assert!((fit.phi[0] - 0.5).abs() < 0.15, "phi = {:?}", fit.phi);
        assert!((fit.innovation_variance - 1.0).abs() < 0.2);
    }

    #[test]
    fn white_noise_has_small_coefficient() {
        let fit = estimate_ar(&normals(11, 500), 1).unwrap();
        assert!(fit.phi[0].abs() < 0.15, "phi = {:?}", fit.phi);
    }

    #[test]
    fn ar2_fit_is_stationary() {
        let x = ar_path(&[0.4, 0.2], &normals(3, 400));
        let fit = estimate_ar(&x, 2).unwrap();
        // AR(2) stationarity triangle
        let (p1, p2) = (fit.phi[0], fit.phi[1]);
        assert!(p2.abs() < 1.0 && p1 + p2 < 1.0 && p2 - p1 < 1.0);
        assert!((p1 - 0.4).abs() < 0.15 && (p2 - 0.2).abs() < 0.15);
    }

    #[test]
    fn whiten_examples() {
        assert_eq!(whiten(&[1.0, 2.0, 3.0], &[], 0), vec![1.0, 2.0, 3.0]);
        assert_eq!(whiten(&[1.0, 2.0, 3.0], &[], 1), vec![2.0, 3.0]);
        let c = 3.0;
        assert!(whiten(&[c; 8], &[0.5], 2).iter().all(|&v| v == 0.5 * c));
    }

    #[test]
    fn whitening_recovers_innovations() {
        let z = normals(5, 300);
        let x = ar_path(&[0.7], &z);
        let w = whiten(&x, &[0.7], 1);
        for (a, b) in w.iter().zip(&z[1..]) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn whitening_reduces_autocorrelation() {
        for seed in 0..5 {
            let x = ar_path(&[0.6, 0.2], &normals(100 + seed, 500));
            let fit = estimate_ar(&x, 2).unwrap();
            let w = whiten(&x, &fit.phi, 2);
            for lag in 1..=2 {
                assert!(autocorrelation(&w, lag).abs() < autocorrelation(&x, lag).abs());
            }
        }
    }

    proptest! {
        #[test]
        fn whitening_is_linear(
            x in proptest::collection::vec(-10.0f64..10.0, 12),
            y in proptest::collection::vec(-10.0f64..10.0, 12),
            phi in proptest::collection::vec(-0.9f64..0.9, 0..3),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let combo: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
            let lhs = whiten(&combo, &phi, 3);
            let wx = whiten(&x, &phi, 3);
            let wy = whiten(&y, &phi, 3);
            for i in 0..lhs.len() {
                prop_assert!((lhs[i] - (a * wx[i] + b * wy[i])).abs() < 1e-9);
            }
        }

        #[test]
        fn burg_fits_are_stationary(seed in 0u64..1000, p in 1usize..5) {
            let x = normals(seed, 60);
            let fit = estimate_ar(&x, p).unwrap();
            // step down to reflection coefficients; all must lie in (-1, 1)
            let mut a: Vec<f64> = fit.phi.iter().map(|c| -c).collect();
            while let Some(&k) = a.last() {
                prop_assert!(k.abs() < 1.0);
                let m = a.len();
                let denom = 1.0 - k * k;
                a = (0..m - 1).map(|i| (a[i] - k * a[m - 2 - i]) / denom).collect();
            }
        }
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! The BMDL objective.
//!
//! For a model `(eta, k, p)` with `q = 2m + 2k` model-specific coefficients
//! and `N = n - p_max` usable rows the score is
//!
//! ```text
//! BMDL = (N/2) log(sigma2)                        goodness of fit
//!      + (q/2) log(nu) + (1/2) log|D'D + I/nu|    mixture code for mu
//!      + (p/2) log(N)                             two-part code for phi
//!      - log[Gamma(a + m) Gamma(b + N - m)]       code for eta
//! ```
//!
//! `sigma2` and `D` come from a profiled fit: OLS on the full design, an AR
//! fit to its residuals, prewhitening, projection of the baseline `(1, t)`
//! out of the whitened response and increments, then a ridge solve with
//! penalty `I/nu`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::arnoise::{estimate_ar, whiten};
use crate::error::{BmdlError, Result};
use crate::linalg::{dot, Cholesky, Matrix, ThinQr};
use crate::model::{
    design_over, validate_model, ChangepointModel, DesignMatrices, Hyperparams, TimeSeries,
};

/// Residual norms below this fraction of the response norm count as a perfect fit.
const DEGENERATE_FIT_TOL: f64 = 1e-12;
const CONDITION_WARN: f64 = 1e12;

/// Plug-in quantities from the profiled fit of one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileFit {
    pub sigma2_hat: f64,
    /// Baseline `(alpha_1, beta_1)`.
    pub s_hat: [f64; 2],
    /// Increments `(alpha_r, beta_r)` for regimes 2..=m+1, then `(theta_i1, theta_i2)`.
    pub mu_hat: Vec<f64>,
    pub phi_hat: Vec<f64>,
    /// `log |D'D + I/nu|` (0 when `q = 0`).
    pub log_det: f64,
    pub nu: f64,
    /// `n - p_max`.
    pub effective_n: usize,
}

/// A model with its score and profile estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredModel {
    pub model: ChangepointModel,
    pub bmdl: f64,
    pub sigma2_hat: f64,
    pub s_hat: [f64; 2],
    pub mu_hat: Vec<f64>,
    pub phi_hat: Vec<f64>,
}

impl ScoredModel {
    /// Total order used to pick winners: lower score, then fewer changepoints,
    /// lower `k`, lower `p`, then earlier changepoint times.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        self.bmdl
            .total_cmp(&other.bmdl)
            .then_with(|| self.model.m().cmp(&other.model.m()))
            .then_with(|| self.model.k.cmp(&other.model.k))
            .then_with(|| self.model.p.cmp(&other.model.p))
            .then_with(|| self.model.changepoints().cmp(other.model.changepoints()))
    }

    pub fn is_better_than(&self, other: &Self) -> bool {
        self.rank_cmp(other) == Ordering::Less
    }
}

/// The `eta` code length `-log[Gamma(a + m) Gamma(b + N - m)]`.
pub fn eta_penalty(m: usize, effective_n: usize, a: f64, b: f64) -> f64 {
    -(ln_gamma(a + m as f64) + ln_gamma(b + effective_n as f64 - m as f64))
}

/// Profiled parameter estimates for `model` on `ts`.
pub fn profile_fit(
    ts: &TimeSeries,
    model: &ChangepointModel,
    hyper: &Hyperparams,
) -> Result<ProfileFit> {
    validate_model(model, hyper, ts.len())?;
    // full design over 1..=n so that whitening has its lags
    let full = design_over(model, ts.period(), 1, ts.len());
    let fit = profile_design(ts.values(), &full, model.p, hyper)?;
    if fit.mu_hat.len() != model.num_increments() {
        return Err(BmdlError::NumericalFailure);
    }
    Ok(fit)
}

/// Profiles an arbitrary design. `full` must cover rows `1..=x.len()`; the
/// columns of `full.d` may come in any order.
pub fn profile_design(
    x: &[f64],
    full: &DesignMatrices,
    p: usize,
    hyper: &Hyperparams,
) -> Result<ProfileFit> {
    let n = x.len();
    let p_max = hyper.p_max;
    if full.first_row != 1 || full.last_row != n || p > p_max {
        return Err(BmdlError::InvalidConfig(format!(
            "design rows {}..={} with p={p} do not match a series of length {n} and p_max={p_max}",
            full.first_row, full.last_row
        )));
    }
    let q = full.d.ncols();
    let effective_n = n.saturating_sub(p_max);
    if effective_n <= 2 + q {
        return Err(BmdlError::InsufficientData {
            needed: p_max + 3 + q,
            available: n,
        });
    }
    let nu = hyper.nu.value(n);

    let phi_hat = if p == 0 {
        Vec::new()
    } else {
        let rows = p_max..n;
        let cols: Vec<&[f64]> = full
            .z
            .columns()
            .chain(full.d.columns())
            .map(|c| &c[rows.clone()])
            .collect();
        let qr = ThinQr::new(cols);
        let mut resid = x[rows].to_vec();
        qr.project_out(&mut resid);
        estimate_ar(&resid, p)?.phi
    };

    let x_w = whiten(x, &phi_hat, p_max);
    let z_w: Vec<Vec<f64>> = full
        .z
        .columns()
        .map(|c| whiten(c, &phi_hat, p_max))
        .collect();
    let d_w: Vec<Vec<f64>> = full
        .d
        .columns()
        .map(|c| whiten(c, &phi_hat, p_max))
        .collect();

    let baseline = ThinQr::new(z_w.iter().map(Vec::as_slice));
    if baseline.rank() < 2 {
        return Err(BmdlError::SingularBaseline);
    }

    let mut y = x_w.clone();
    baseline.project_out(&mut y);
    let d_hat = Matrix::from_columns(
        effective_n,
        d_w.iter()
            .map(|c| {
                let mut c = c.clone();
                baseline.project_out(&mut c);
                c
            })
            .collect(),
    );

    let mut gram = d_hat.gram();
    for i in 0..q {
        gram.set(i, i, gram.get(i, i) + 1.0 / nu);
    }
    let chol = Cholesky::factor(&gram).ok_or(BmdlError::NumericalFailure)?;
    let cond = chol.condition_estimate();
    if cond > CONDITION_WARN {
        log::warn!("ill-conditioned increment Gram matrix (estimate {cond:.3e}, q={q})");
    }
    let dty: Vec<f64> = d_hat.columns().map(|c| dot(c, &y)).collect();
    let mu_hat = chol.solve(&dty);

    let fitted = d_hat.mul_vec(&mu_hat);
    let resid: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let rss = dot(&y, &resid);
    let scale = dot(&x_w, &x_w);
    if !(rss > 0.0) || rss <= (DEGENERATE_FIT_TOL * DEGENERATE_FIT_TOL) * scale {
        return Err(BmdlError::DegenerateVariance);
    }
    let sigma2_hat = rss / effective_n as f64;

    // recover the baseline from the whitened response net of the increments
    let mut net = x_w;
    for (col, &c) in d_w.iter().zip(&mu_hat) {
        net.iter_mut().zip(col).for_each(|(v, d)| *v -= c * d);
    }
    let s = baseline.solve(&net);

    Ok(ProfileFit {
        sigma2_hat,
        s_hat: [s[0], s[1]],
        mu_hat,
        phi_hat,
        log_det: chol.log_det(),
        nu,
        effective_n,
    })
}

/// Assembles the BMDL value from a profiled fit.
pub fn bmdl_from_profile(fit: &ProfileFit, model: &ChangepointModel, hyper: &Hyperparams) -> f64 {
    bmdl_terms(fit, model.m(), model.p, hyper)
}

/// Score of a profiled design with `m` changepoints and AR order `p`.
pub fn bmdl_terms(fit: &ProfileFit, m: usize, p: usize, hyper: &Hyperparams) -> f64 {
    let big_n = fit.effective_n as f64;
    let q = fit.mu_hat.len();
    let fit_term = 0.5 * big_n * fit.sigma2_hat.ln();
    let mu_term = if q == 0 {
        0.0
    } else {
        0.5 * q as f64 * fit.nu.ln() + 0.5 * fit.log_det
    };
    let ar_term = 0.5 * p as f64 * big_n.ln();
    fit_term + mu_term + ar_term + eta_penalty(m, fit.effective_n, hyper.a, hyper.b)
}

pub fn bmdl_score(ts: &TimeSeries, model: &ChangepointModel, hyper: &Hyperparams) -> Result<f64> {
    let fit = profile_fit(ts, model, hyper)?;
    Ok(bmdl_from_profile(&fit, model, hyper))
}

/// Profiles and scores `model`.
pub fn score_model(
    ts: &TimeSeries,
    model: &ChangepointModel,
    hyper: &Hyperparams,
) -> Result<ScoredModel> {
    let fit = profile_fit(ts, model, hyper)?;
    let bmdl = bmdl_from_profile(&fit, model, hyper);
    Ok(ScoredModel {
        model: model.clone(),
        bmdl,
        sigma2_hat: fit.sigma2_hat,
        s_hat: fit.s_hat,
        mu_hat: fit.mu_hat,
        phi_hat: fit.phi_hat,
    })
}

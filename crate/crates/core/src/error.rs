// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

/// Reason a candidate changepoint model is not admissible.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("changepoint within first p_max times: t={t} <= p_max={p_max}")]
    EarlyChangepoint { t: usize, p_max: usize },
    #[error("changepoint t={t} outside 1..={n}")]
    ChangepointOutOfRange { t: usize, n: usize },
    #[error("harmonic order k={k} exceeds k_max={k_max}")]
    HarmonicOrderOutOfRange { k: usize, k_max: usize },
    #[error("AR order p={p} exceeds p_max={p_max}")]
    ArOrderOutOfRange { p: usize, p_max: usize },
    #[error("regime {regime} has length {len}, shorter than the minimum {min}")]
    RegimeTooShort {
        regime: usize,
        len: usize,
        min: usize,
    },
    #[error("model is defined for n={model_n} but the series has n={n}")]
    LengthMismatch { model_n: usize, n: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BmdlError {
    #[error("invalid time series: {0}")]
    InvalidSeries(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("invalid model: {0}")]
    InvalidModel(#[from] ModelError),
    #[error("not enough observations: {needed} usable rows needed, {available} available")]
    InsufficientData { needed: usize, available: usize },
    #[error("baseline design (intercept, time) is singular after whitening")]
    SingularBaseline,
    #[error("residual variance is zero; the score is unbounded below")]
    DegenerateVariance,
    #[error("increment Gram matrix is not numerically positive definite")]
    NumericalFailure,
    #[error("AR estimation failed: {0}")]
    ArEstimation(String),
    #[error("bounded model space has {count} models, above the cap of {cap}")]
    TooManyModels { count: u128, cap: u128 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = BmdlError> = std::result::Result<T, E>;

impl BmdlError {
    /// Numerical breakdown of the fit itself, as opposed to bad input or configuration.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Self::SingularBaseline
                | Self::DegenerateVariance
                | Self::NumericalFailure
                | Self::ArEstimation(_)
        )
    }
}

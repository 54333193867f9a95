// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

use bmdl_core::BmdlError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable input, bad flags or an unmet precondition.
    #[error("{0}")]
    Input(String),
    #[error("series {series:?}: {source}")]
    Degenerate { series: String, source: BmdlError },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Input(_) => 2,
            Self::Degenerate { .. } => 3,
            Self::Io { .. } | Self::Internal(_) => 1,
        }
    }

    /// Classifies a core error raised while processing `series`.
    pub fn from_core(series: &str, err: BmdlError) -> Self {
        if err.is_degenerate() {
            Self::Degenerate {
                series: series.to_string(),
                source: err,
            }
        } else {
            Self::Input(format!("series {series:?}: {err}"))
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Self::Io { path, source }
    }
}

pub type CliResult<T> = Result<T, CliError>;

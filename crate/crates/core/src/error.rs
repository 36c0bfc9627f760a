// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the attribution engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is singular after {attempts} jitter retries (last jitter {last_jitter:e})")]
    Singular { attempts: usize, last_jitter: f64 },

    #[error("Hessian is not positive definite (damping {damping:e})")]
    IndefiniteHessian { damping: f64 },

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("did not converge: {0}")]
    NotConverged(String),

    #[error("need at least {needed} subset runs, got {found}")]
    InsufficientRuns { needed: usize, found: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("hash mismatch for {what}: expected {expected}, found {found}")]
    HashMismatch {
        what: &'static str,
        expected: String,
        found: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the numerics (as opposed to bad input data).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::Singular { .. }
                | Error::IndefiniteHessian { .. }
                | Error::Diverged { .. }
                | Error::NotConverged(_)
        )
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}

pub(crate) fn check_finite(context: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}

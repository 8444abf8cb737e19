//! Crate-wide error type.
//!
//! Operations reject bad arguments rather than panicking so the CLI can map
//! failures onto exit codes: configuration and format problems are
//! [`Error::InvalidInput`] / [`Error::Format`] / [`Error::Io`], while runtime
//! numerical breakdowns (solver stagnation, diverged training) are
//! [`Error::SolveFailure`] / [`Error::Diverged`] / [`Error::NonFinite`].

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A serialized artifact (array file, manifest, checkpoint) is malformed.
    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// The conjugate gradient solver failed to reach the requested residual.
    #[error("linear solve failed: relative residual {residual:.3e} after {iterations} iterations")]
    SolveFailure { residual: f64, iterations: usize },

    /// Training loss became NaN; the recorded history is kept by the caller.
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    /// A computation produced a non-finite value where one is not allowed.
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}

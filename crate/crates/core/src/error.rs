//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures reported by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Operand dimensions disagree.
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// An iterative solve did not reach its tolerance.
    #[error("solver failed to converge after {iterations} iterations (relative residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },
    /// A matrix expected to be positive definite is not.
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotSpd { pivot: usize, value: f64 },
    /// A failure attributed to a specific parameter sample.
    #[error("sample {sample}: {source}")]
    Sample {
        sample: usize,
        #[source]
        source: Box<Error>,
    },
    /// Training aborted because the loss blew up.
    #[error("training diverged at iteration {iteration} (loss {loss:e})")]
    Diverged { iteration: usize, loss: f64 },
    /// Broken internal invariant.
    #[error("internal consistency error: {0}")]
    Internal(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Wraps an error with the index of the sample that produced it.
    pub fn for_sample(self, sample: usize) -> Self {
        Error::Sample {
            sample,
            source: Box::new(self),
        }
    }

    /// Short machine-readable category name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::DimMismatch { .. } => "dim_mismatch",
            Error::SolverFailure { .. } => "solver_failure",
            Error::NotSpd { .. } => "not_spd",
            Error::Sample { source, .. } => source.kind(),
            Error::Diverged { .. } => "diverged",
            Error::Internal(_) => "internal",
            Error::Io(_) => "io",
            Error::Format(_) => "format",
        }
    }
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimMismatch {
            what,
            expected,
            got,
        })
    }
}

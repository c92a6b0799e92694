use std::path::PathBuf;

use nalgebra::DVector;
use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// The secular root-finder ran out of iterations. Carries the best step seen.
    #[error("subproblem solver failed after {iterations} iterations (residual {residual:e})")]
    SolverFailure {
        iterations: usize,
        residual: f64,
        best: DVector<f64>,
    },

    #[error("inexact certificate invalid: model decrease {0:e} is not positive")]
    CertificateInvalid(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

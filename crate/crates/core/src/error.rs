//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by kinematics, model evaluation, solvers and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A deformation gradient (or phase deformation gradient) left GL+(3).
    #[error("non-positive jacobian: det = {det}")]
    NonPositiveJacobian { det: f64 },

    /// Vector/matrix extents do not match the expected layer or model shape.
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    /// Invalid configuration value (non-positive modulus, bad selector name, ...).
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Newton iteration on the laminate amplitudes failed to converge.
    #[error("newton solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// The Newton system matrix was singular to working precision.
    #[error("singular system matrix in newton step")]
    SingularSystem,

    /// Training loss became NaN or infinite.
    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },

    /// Dataset violates its invariants (empty path, duplicate ids, det <= 0 rows).
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed dataset CSV or checkpoint JSON.
    #[error("format error: {0}")]
    Format(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

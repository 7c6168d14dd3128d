//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A flow utility evaluated to NaN or infinity.
    #[error("non-finite utility at action {action}, state {state}")]
    NonFiniteUtility { action: usize, state: usize },

    /// An iterative solver ran out of iterations.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    /// Invalid input or an evaluation left the function's domain.
    #[error("{0}")]
    Domain(String),

    /// Shape mismatch between related objects.
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// A linear solve hit a singular matrix.
    #[error("singular matrix in {0}")]
    Singular(&'static str),

    /// A linear system is too ill-conditioned to trust.
    #[error("sensitivity system ill-posed: condition number {cond:.3e} exceeds 1e12")]
    IllConditioned { cond: f64 },

    /// A method's mathematical premise failed its runtime check.
    #[error("premise violated: {0}")]
    Premise(String),

    /// A self-consistency cross-check failed (e.g. KKT residual at a
    /// claimed optimum).
    #[error("inconsistency: {0}")]
    Inconsistency(String),

    /// Perfect separation in the first-stage logit.
    #[error("perfect separation detected in CCP logit; use a frequency estimator on the separated states instead")]
    Separation,

    /// I/O error with the offending path attached.
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file.
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}

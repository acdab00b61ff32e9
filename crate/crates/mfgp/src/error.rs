//! Crate-wide error type.
//!
//! Everything user input can trigger is a recoverable [`Error`]; internal
//! invariant violations panic instead (they indicate bugs, not bad input).

use thiserror::Error;

/// Errors surfaced by the library and CLI.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value failed validation. The message names the
    /// offending field (e.g. `"N must be >= 2"`).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A function-family evaluation was queried outside its domain
    /// (negative density, non-convex tabulated data, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The convex conjugate sup diverged at the queried slope.
    #[error("Legendre transform unbounded at v = {v}")]
    LegendreUnbounded { v: f64 },

    /// Two boundary particles coincide (or are closer than the quantile
    /// inversion can resolve), so the trajectory cone has empty interior.
    #[error("degenerate boundary data: particles {i} and {j} coincide")]
    DegenerateBoundary { i: usize, j: usize },

    /// Line search could not make progress. Carries the best iterate found
    /// so callers can inspect or report it.
    #[error(
        "solver stalled after {} iterations (grad norm {:.3e})",
        result.iterations,
        result.final_grad_norm
    )]
    SolverStalled { result: Box<crate::optimizer::SolveResult> },

    /// Quantile inversion could not bracket the requested level.
    #[error("quantile bracketing failed: level {level} unreachable ({detail})")]
    QuantileBracket { level: f64, detail: String },

    /// Malformed tabulated data (CSV or inline samples).
    #[error("tabulated data: {0}")]
    TabulatedData(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand for a named-field configuration error.
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Shorthand for a domain error.
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

//! Error type shared across the library.

use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is outside its legal range. The message names
    /// the offending field.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A vector or matrix has the wrong dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A NaN or infinity appeared where a finite value is required.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// A regression weight fell outside (0, 1].
    #[error("weight {0} outside (0, 1]")]
    InvalidWeight(f64),

    /// An action was requested from an empty decision set.
    #[error("empty decision set")]
    EmptyDecisionSet,

    /// The operation is only defined for fixed finite decision sets.
    #[error("{0} is not defined for fresh-sphere decision sets")]
    UnsupportedDecisionSet(&'static str),

    /// A dense factorization failed; the state is numerically unusable.
    #[error("numerical failure: {0}")]
    Numerical(&'static str),

    /// Filesystem failure while writing run outputs.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

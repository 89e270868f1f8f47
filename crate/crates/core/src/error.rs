//! Error type shared by every module.

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum SeaperError {
    /// A model parameter lies outside its admissible range.
    #[error("parameter `{field}` out of range: {message}")]
    ParameterDomain { field: &'static str, message: String },

    /// Input data has the wrong shape (odd length, too short, ...).
    #[error("invalid input shape: {0}")]
    InputShape(String),

    /// The pole-aligned grid has no admissible ordinates.
    #[error("degenerate frequency grid: {0}")]
    DegenerateGrid(String),

    /// Quadrature, factorization or optimisation failed.
    #[error("numeric failure: {0}")]
    NumericFailure(String),

    /// A periodogram ordinate was zero where its logarithm is needed.
    #[error("zero periodogram ordinate at k = {0}")]
    LogDomain(i64),

    /// The estimator could not produce a usable fit.
    #[error("estimation failed: {0}")]
    EstimationFailure(String),

    /// Configuration or command-line problem.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl SeaperError {
    pub(crate) fn domain(field: &'static str, message: impl Into<String>) -> Self {
        SeaperError::ParameterDomain { field, message: message.into() }
    }

    /// Process exit code for the CLI: 2 config, 3 numeric, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            SeaperError::ParameterDomain { .. }
            | SeaperError::InputShape(_)
            | SeaperError::DegenerateGrid(_)
            | SeaperError::Config(_) => 2,
            SeaperError::NumericFailure(_)
            | SeaperError::LogDomain(_)
            | SeaperError::EstimationFailure(_) => 3,
            SeaperError::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, SeaperError>;

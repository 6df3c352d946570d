use thiserror::Error;

/// Errors produced by the solver, the problem builders, and the experiment
/// runner.
#[derive(Debug, Error)]
pub enum NmmError {
    /// A vector was passed to an operator or objective of a different size.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An objective or model produced a non-finite value or gradient entry.
    /// This aborts the run; the message identifies the evaluation site.
    #[error("non-finite {what} encountered at {site}")]
    NonFinite { what: &'static str, site: String },

    /// Invalid configuration (bad parameter values, inconsistent hierarchy,
    /// malformed config file).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl NmmError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        NmmError::Config(msg.into())
    }
}

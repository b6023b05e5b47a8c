use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    /// Parameters outside the regime where a formula applies.
    #[error("out of regime: {0}")]
    OutOfRegime(String),

    /// `eps` at or above the existence threshold (with the guard band applied).
    #[error("no solution regime: eps = {eps:e} must be below {threshold:e} (guarded eps_a)")]
    NoSolutionRegime { eps: f64, threshold: f64 },

    #[error("convergence failure: {message}")]
    ConvergenceFailure {
        message: String,
        /// Last iterate, when one exists.
        last_iterate: Option<Vec<f64>>,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn no_convergence(msg: impl Into<String>, last: Option<Vec<f64>>) -> Self {
        Error::ConvergenceFailure {
            message: msg.into(),
            last_iterate: last,
        }
    }
}

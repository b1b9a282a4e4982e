use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Inputs are individually valid but do not fit together
    /// (e.g. a register state and a transition set of different sizes).
    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative solver stopped before reaching its tolerance.
    #[error("solver failed after {iterations} iterations (residual {residual:.3e}): {message}")]
    SolverFailure {
        message: String,
        iterations: usize,
        residual: f64,
    },

    #[error("fit failed after {iterations} iterations (chi2 {chi2:.4e}): {message}")]
    FitFailure {
        message: String,
        iterations: usize,
        chi2: f64,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of a numerical procedure rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::SolverFailure { .. } | Error::FitFailure { .. })
    }
}

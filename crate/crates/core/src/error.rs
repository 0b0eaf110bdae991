use thiserror::Error;

/// Errors raised by the factorization and completion routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("evaluation outside the domain: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The input is not nonnegative definite on the unit circle (or has an
    /// odd-multiplicity zero there) and therefore has no spectral factor.
    #[error("not factorable: {0}")]
    NotFactorable(String),

    /// An iteration or an algebraic identity failed numerically. `residual`
    /// carries the best value achieved, when one exists.
    #[error("numerical failure: {message} (residual {residual:e})")]
    NumericalFailure { message: String, residual: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("indeterminate: {0}")]
    Indeterminate(String),

    #[error("not paraunitary: {0}")]
    NotParaunitary(String),

    #[error("invalid comparison: {0}")]
    InvalidComparison(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn numerical(message: impl Into<String>, residual: f64) -> Self {
        Error::NumericalFailure {
            message: message.into(),
            residual,
        }
    }

    /// True for errors caused by the caller's input rather than by the
    /// numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch(_)
                | Error::Domain(_)
                | Error::InvalidInput(_)
                | Error::NotFactorable(_)
                | Error::Degenerate(_)
                | Error::Precondition(_)
                | Error::NotParaunitary(_)
                | Error::InvalidComparison(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The QL iteration failed to split off an eigenvalue.
    #[error("eigenvalue iteration did not converge at index {index} after {sweeps} sweeps")]
    Convergence { index: usize, sweeps: usize },

    /// Two quadrature resolutions disagreed by more than the allowed amount.
    #[error("quadrature refinement disagreed: {coarse} vs {fine} (relative {relative:e})")]
    Accuracy { coarse: f64, fine: f64, relative: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}

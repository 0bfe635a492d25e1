use thiserror::Error;

/// Errors produced by the simulator and the fitting layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("photon cap exceeded: operation needs {requested} photons, cap is {cap}")]
    Capacity { requested: usize, cap: usize },

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("division domain: {0}")]
    DivisionDomain(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("fit failed after {iterations} iterations: {reason}")]
    FitFailure { iterations: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

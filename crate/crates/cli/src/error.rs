use std::process::ExitCode;

use thiserror::Error;

/// CLI failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration or override.
    #[error("config error: {0}")]
    Config(String),
    /// Malformed or insufficient input data.
    #[error("data error: {0}")]
    Data(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Data(_) => 2,
            Self::Fit(_) => 3,
            Self::Io(_) => 4,
        }
    }

    pub fn io(context: impl std::fmt::Display, err: std::io::Error) -> Self {
        Self::Io(format!("{context}: {err}"))
    }
}

impl From<CliError> for ExitCode {
    fn from(e: CliError) -> Self {
        ExitCode::from(e.exit_code())
    }
}

impl From<fockwise::Error> for CliError {
    fn from(e: fockwise::Error) -> Self {
        use fockwise::Error as E;
        match e {
            E::FitFailure { .. } | E::NumericalDegeneracy(_) => Self::Fit(e.to_string()),
            E::InvalidData(_) => Self::Data(e.to_string()),
            E::InvalidArgument(_) | E::Capacity { .. } | E::DivisionDomain(_) => Self::Config(e.to_string()),
        }
    }
}

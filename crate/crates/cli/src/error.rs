//! CLI error type with process exit-code mapping.

use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] hmocgp_core::Error),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("invalid configuration in {path}: {message}")]
    Config { path: String, message: String },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 0 success, 2 configuration/input error, 3 numerical/training failure.
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Core(e) => match e {
                hmocgp_core::Error::NumericalDegeneracy { .. }
                | hmocgp_core::Error::NonFiniteGradient { .. }
                | hmocgp_core::Error::NonFiniteElbo { .. }
                | hmocgp_core::Error::TrainingDivergence { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            },
            _ => ExitCode::from(2),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

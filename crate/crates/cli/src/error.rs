use std::process::ExitCode;

use orient_rds::RdsError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Param(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Instability(String),
}

impl CliError {
    pub fn param(msg: impl Into<String>) -> Self {
        Self::Param(msg.into())
    }

    pub fn io(msg: impl Into<String>) -> Self {
        Self::Io(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Self::Param(_) => 2,
            Self::Io(_) => 3,
            Self::Instability(_) => 4,
        })
    }
}

impl From<RdsError> for CliError {
    fn from(e: RdsError) -> Self {
        match e {
            RdsError::Instability { .. } => Self::Instability(e.to_string()),
            _ => Self::Param(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

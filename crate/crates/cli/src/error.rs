//! Failure classes of the command-line tool and their exit codes.

use thiserror::Error;
use wnt_core::Error as CoreError;

/// Why a command did not succeed.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, configuration or parameters outside a precondition.
    #[error("usage: {0}")]
    Usage(String),
    /// The numerics failed.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Validation ran but at least one check failed.
    #[error("validation failed: {0}")]
    ValidationFailed(String),
}

impl CliError {
    /// Process exit code.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ValidationFailed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Domain(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

//! CLI error wrapper and the stable exit-code contract.

use std::path::PathBuf;

use budgetsched_core::Error as CoreError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_SERVICE: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, bad config values, inconsistent options.
    Usage(String),
    /// Failure writing an output file.
    Write(PathBuf, std::io::Error),
    Core(CoreError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Write(..) => EXIT_DATA,
            CliError::Core(e) if e.is_client_error() => EXIT_SERVICE,
            CliError::Core(e) if e.is_data_error() => EXIT_DATA,
            CliError::Core(_) => EXIT_USAGE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Write(path, e) => write!(f, "cannot write {}: {e}", path.display()),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

use std::io;
use std::path::PathBuf;

use ctdr_core::Error as CoreError;

/// Everything a command can fail with, grouped by process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl std::fmt::Display) -> Self {
        CliError::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// 2 for configuration and contract errors, 3 for a diverged run, 4 for I/O
    /// and unreadable input files.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                CoreError::NonFiniteLoss { .. } => 3,
                CoreError::BadMagic
                | CoreError::UnsupportedVersion(_)
                | CoreError::Truncated
                | CoreError::ShapeMismatch(_) => 4,
                _ => 2,
            },
            CliError::Io { .. } | CliError::Format { .. } => 4,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown example '{name}' (available: {available})")]
    UnknownExample { name: String, available: String },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error("trajectory diverged after diagonal {0}")]
    Diverged(usize),
    #[error("{0}")]
    Core(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Core(_) => EXIT_IO,
            CliError::Parse { .. } | CliError::Config(_) | CliError::UnknownExample { .. } => EXIT_PARSE,
            CliError::Infeasible(_) | CliError::CheckFailed(_) => EXIT_INFEASIBLE,
            CliError::Diverged(_) => EXIT_DIVERGED,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

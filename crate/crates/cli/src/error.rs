use std::path::PathBuf;

use sca_core::ScaError;

/// Process exit codes.
pub const EXIT_OK: u8 = 0;
/// Bad configuration, flags or input file contents.
pub const EXIT_CONFIG: u8 = 2;
/// The model or the file system failed while running.
pub const EXIT_RUNTIME: u8 = 3;
/// `selfcheck` ran but at least one threshold was missed.
pub const EXIT_SELFCHECK: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{}: {message}", path.display())]
    MalformedInput { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("writing output: {0}")]
    Output(String),
    #[error(transparent)]
    Model(#[from] ScaError),
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::MalformedInput { .. } => EXIT_CONFIG,
            CliError::Io { .. } | CliError::Output(_) | CliError::Model(_) => EXIT_RUNTIME,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

use std::path::Path;

use thiserror::Error;

/// Failure classes, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numeric(_) => "numeric",
            CliError::Io(_) => "io",
        }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    /// Attaches the offending file to a core error raised while reading it.
    pub fn reading(path: &Path, err: momnet::Error) -> Self {
        match err {
            momnet::Error::Io(e) => CliError::io(path, e),
            momnet::Error::Parse { line, msg } => CliError::Io(format!("{}:{line}: {msg}", path.display())),
            other => CliError::from(other),
        }
    }
}

impl From<momnet::Error> for CliError {
    fn from(err: momnet::Error) -> Self {
        use momnet::Error as E;
        match err {
            E::NonFinite(_) | E::TrainingDiverged { .. } => CliError::Numeric(err.to_string()),
            E::Io(_) | E::Parse { .. } => CliError::Io(err.to_string()),
            E::DimensionMismatch { .. } | E::InvalidParameter(_) | E::Empty(_) | E::TightFrameViolation(_) => {
                CliError::Config(err.to_string())
            }
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;
use torus_polymer::error::Error as CoreError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VALIDATION_FAILED: i32 = 1;
    pub const STABILITY: i32 = 2;
    pub const RESOLUTION: i32 = 3;
    pub const USAGE: i32 = 64;
    pub const SCHEMA: i32 = 65;
    pub const SOFTWARE: i32 = 70;
    pub const IO: i32 = 74;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("config {path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("validation failed: {0}")]
    ValidationFailed(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => exit::USAGE,
            Self::Schema { .. } => exit::SCHEMA,
            Self::Io { .. } => exit::IO,
            Self::ValidationFailed(_) => exit::VALIDATION_FAILED,
            Self::Core(e) => match e {
                CoreError::Stability { .. } => exit::STABILITY,
                CoreError::Resolution { .. } | CoreError::Discretization { .. } => exit::RESOLUTION,
                CoreError::InvalidParameter(_)
                | CoreError::Precondition(_)
                | CoreError::UnsupportedModel(_) => exit::USAGE,
                _ => exit::SOFTWARE,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_classes() {
        let stability = CoreError::Stability {
            time: 1.0,
            reason: "negative field".into(),
        };
        assert_eq!(CliError::Core(stability).exit_code(), exit::STABILITY);
        assert_eq!(CliError::Usage("x".into()).exit_code(), exit::USAGE);
        assert_eq!(
            CliError::Core(CoreError::InvalidParameter("x".into())).exit_code(),
            exit::USAGE
        );
    }
}

use std::path::PathBuf;

/// Failures of a command, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] gdyn_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("verification failed: {0}")]
    Verification(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        CliError::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        use gdyn_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } | CliError::Format { .. } => EXIT_VALIDATION,
            CliError::Verification(_) => EXIT_VERIFICATION,
            CliError::Core(e) => match e.root() {
                E::InvalidParameter { .. }
                | E::DimensionMismatch { .. }
                | E::UnsupportedDimension { .. } => EXIT_VALIDATION,
                E::GridMismatch(_) | E::GridTooLarge { .. } => EXIT_VALIDATION,
                _ => EXIT_NUMERICAL,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::config("x").exit_code(), EXIT_VALIDATION);
        assert_eq!(
            CliError::Verification("x".into()).exit_code(),
            EXIT_VERIFICATION
        );
        let e: CliError = gdyn_core::Error::Singular.at_step(3).into();
        assert_eq!(e.exit_code(), EXIT_NUMERICAL);
        let e: CliError = gdyn_core::Error::DimensionMismatch {
            expected: 1,
            got: 2,
        }
        .into();
        assert_eq!(e.exit_code(), EXIT_VALIDATION);
    }
}

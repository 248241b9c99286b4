use std::path::PathBuf;

use dentgen_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("{} already exists; pass --force to overwrite it", .0.display())]
    Exists(PathBuf),

    #[error("{} is missing; run `{}` first", .path.display(), .step)]
    MissingArtifact { path: PathBuf, step: &'static str },

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: CoreError,
    },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 for invalid input or unusable files, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core { source, .. } => match source {
                CoreError::Diverged { .. } | CoreError::NonFinite(_) | CoreError::Degenerate(_) => 3,
                _ => 2,
            },
            _ => 2,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(source: CoreError) -> Self {
        CliError::Core {
            context: "error".into(),
            source,
        }
    }
}

/// Attaches context to core errors.
pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> CliResult<T>;
}

impl<T> Context<T> for Result<T, CoreError> {
    fn context(self, what: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|source| CliError::Core { context: what(), source })
    }
}

pub(crate) fn io_err(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Validation(format!("{}: {e}", path.display()))
}

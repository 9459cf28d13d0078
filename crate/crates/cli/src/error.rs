use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// The spec file is unreadable, malformed or inconsistent.
    #[error("spec error: {0}")]
    Spec(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// At least one method failed; the other results were written.
    #[error("solver failure: {0}")]
    Solver(String),

    /// A closed form disagreed with the simulation oracle or an optimizer
    /// trace decreased.
    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Core(#[from] mimo_pilot::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 0 success, 1 i/o or internal, 2 spec, 3 solver, 4 validation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Spec(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Validation(_) => 4,
            CliError::Core(e) => match e {
                mimo_pilot::Error::Solver(_) => 3,
                mimo_pilot::Error::Generation { .. } => 1,
                _ => 2,
            },
        }
    }
}

use std::path::PathBuf;

use elastic_shape::ShapeError;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("input {}: {message}", path.display())]
    Input { path: PathBuf, message: String },
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

impl CliError {
    pub fn input(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Input {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// 2 config, 3 input or I/O, 4 numerical failure.
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Input { .. } => 3,
            CliError::Shape(e) => match e {
                ShapeError::OutOfRange(_)
                | ShapeError::DuplicateTerm(_)
                | ShapeError::GridTooSmall { .. } => 2,
                ShapeError::Io { .. }
                | ShapeError::Parse { .. }
                | ShapeError::DimensionMismatch(_)
                | ShapeError::TooFewInputs { .. } => 3,
                _ => 4,
            },
        }
    }
}

/// Errors while reading a named input are input errors whatever their kind.
pub fn reading<T>(path: &std::path::Path, r: Result<T, ShapeError>) -> Result<T, CliError> {
    r.map_err(|e| match e {
        ShapeError::Io { path, source } => CliError::input(path, source),
        ShapeError::Parse { path, message } => CliError::input(path, message),
        other => CliError::input(path, other),
    })
}

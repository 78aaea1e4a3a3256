use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the shape-analysis library.
#[derive(Error, Debug)]
pub enum ShapeError {
    #[error("grid dimensions {n_u}x{n_v} too small (minimum 8x8)")]
    GridTooSmall { n_u: usize, n_v: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value at node {0}")]
    NonFinite(usize),

    #[error("surface has zero area; cannot rescale")]
    ZeroArea,

    #[error("orientation violated: Jacobian determinant {det:.3e} at node {node}")]
    Orientation { node: usize, det: f64 },

    #[error("diffeomorphism generation failed to preserve orientation after {retries} retries")]
    DiffeoGeneration { retries: usize },

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("need at least {needed} inputs, got {got}")]
    TooFewInputs { needed: usize, got: usize },

    #[error("rank-deficient design matrix; collinear columns: {columns:?}")]
    RankDeficient { columns: Vec<String> },

    #[error("underdetermined system: {rows} rows for {cols} columns")]
    Underdetermined { rows: usize, cols: usize },

    #[error("duplicate term `{0}`")]
    DuplicateTerm(String),

    #[error("no {0} pairs available")]
    EmptyPairSet(&'static str),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl ShapeError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ShapeError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        ShapeError::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, ShapeError>;

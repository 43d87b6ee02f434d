use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot open {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("malformed input at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("column {column} out of range for rows of width {width}")]
    ColumnOutOfRange { column: usize, width: usize },

    #[error("at least 2 variables are required, got {0}")]
    TooFewVariables(usize),

    #[error("column {0} has no observed values")]
    EmptyColumn(String),

    #[error("invalid window geometry: {0}")]
    Geometry(String),

    #[error("matrix must be square and symmetric: {0}")]
    NotSymmetric(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("penalty must be finite and non-negative, got {0}")]
    NegativePenalty(f64),

    #[error("window {index}: {source}")]
    Window {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least {needed} elements, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("serialization failed: {0}")]
    Serialize(String),
}

/// Pipeline stage tags used to label errors surfaced by [`crate::pipeline`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Windowing,
    Recovery,
    Trajectory,
    Allocation,
    Eval,
    Output,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Stage::Ingest => "ingest",
            Stage::Windowing => "windowing",
            Stage::Recovery => "graph-recovery",
            Stage::Trajectory => "trajectory",
            Stage::Allocation => "allocation",
            Stage::Eval => "eval",
            Stage::Output => "output",
        };
        f.write_str(name)
    }
}

impl Error {
    pub(crate) fn at_stage(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The pipeline stage this error was raised in, if it was tagged.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

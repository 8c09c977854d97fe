use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("insufficient snapshots: {0}")]
    InsufficientSnapshots(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("all-zero covariance")]
    ZeroCovariance,

    #[error("invalid antenna selection: {0}")]
    InvalidSelection(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("regularization required: ridge system is not positive definite with gamma = {0}")]
    RegularizationRequired(f64),

    #[error("model is not trained")]
    Untrained,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("format error: {0}")]
    Format(String),

    #[error("version mismatch: {what} (expected {expected}, found {found})")]
    VersionMismatch {
        what: &'static str,
        expected: u32,
        found: u32,
    },

    #[error("truncated payload: {0}")]
    Truncated(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Wraps the error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

//! Error type shared by every module of the crate.

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("label column `{0}` not found in header")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a finite number")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: non-binary label {value} for a classification dataset")]
    NonBinaryLabel { row: usize, value: f64 },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("task mismatch: model is {model:?}, dataset is {data:?}")]
    TaskMismatch {
        model: crate::TaskKind,
        data: crate::TaskKind,
    },

    #[error("non-finite value in {what}: {detail}")]
    NonFinite { what: &'static str, detail: String },

    #[error("non-finite training loss at iteration {iteration} (sample {sample})")]
    NonFiniteLoss { iteration: usize, sample: usize },

    #[error("sub-model {index}: {source}")]
    SubModel {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the numbers themselves rather than by the
    /// input files or the configuration.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::NonFinite { .. } | Error::NonFiniteLoss { .. } | Error::Metric(_) => true,
            Error::SubModel { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path} is empty")]
    EmptyFile { path: PathBuf },

    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("header mismatch: expected {expected:?}, found {found:?}")]
    HeaderMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("schema: {0}")]
    Schema(String),

    #[error("row {row}, column `{column}`: cannot parse {value:?} as {kind}")]
    BadValue {
        row: usize,
        column: String,
        value: String,
        kind: &'static str,
    },

    #[error("label column `{column}` holds {count} distinct values, expected exactly 2")]
    LabelCardinality { column: String, count: usize },

    #[error("label {0} has no rows")]
    MissingLabel(u8),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid split sizes: {0}")]
    InvalidSizes(String),

    #[error("stratum for label {label} has {available} rows, {needed} needed")]
    StratumTooSmall {
        label: u8,
        needed: usize,
        available: usize,
    },

    #[error("dimension {0} has zero variance on the annotation training split")]
    ZeroVariance(usize),

    #[error("dimension index {index} out of range for {dims} dimensions")]
    DimensionOutOfRange { index: usize, dims: usize },

    #[error("fewer than 2 usable dimensions (found {0})")]
    TooFewDimensions(usize),

    #[error("correlation table is empty")]
    EmptyTable,

    #[error("invalid rectangle: {0}")]
    InvalidRectangle(String),

    #[error("model has no rectangles")]
    EmptyModel,

    #[error("no sample is covered by any rectangle")]
    NoCoverage,

    #[error("model {0} has not been scored on the annotation test split")]
    Unscored(String),

    #[error("model list is empty")]
    NoModels,

    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training data contains a single label")]
    SingleLabel,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("fold {fold} is missing label {label}")]
    FoldMissingLabel { fold: usize, label: u8 },

    #[error("normal equations are singular; use a nonzero ridge penalty")]
    Singular,

    #[error("empty input")]
    EmptyInput,

    #[error("degenerate pair: all annotation points coincide")]
    DegeneratePair,

    #[error("accuracy readout failed: {0}")]
    Readout(String),

    #[error("{path}:{line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

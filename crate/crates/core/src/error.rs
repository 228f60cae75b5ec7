use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Filesystem or environment problem.
    Io,
    /// Input data or configuration failed validation.
    Data,
    /// A numeric routine produced or received non-finite values.
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", path.display())]
    FileNotFound { path: PathBuf },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing declared column `{0}`")]
    MissingColumn(String),

    #[error("non-numeric cell at row {row} (line {line}), column `{column}`: {value:?}")]
    NonNumeric {
        row: usize,
        line: u64,
        column: String,
        value: String,
    },

    #[error("non-finite cell at row {row} (line {line}), column `{column}`")]
    NonFinite {
        row: usize,
        line: u64,
        column: String,
    },

    #[error("treatment value outside {{0,1}} at row {row} (line {line}): {value:?}")]
    TreatmentOutOfRange {
        row: usize,
        line: u64,
        value: String,
    },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("{0} group has zero members")]
    EmptyGroup(&'static str),

    #[error("single-class data")]
    SingleClass,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("label outside {{0,1}}: {0}")]
    InvalidLabel(u8),

    #[error("non-finite gradient entry")]
    NonFiniteGradient,

    #[error("non-finite value in {0}")]
    NumericFailure(&'static str),

    #[error("requested {requested} pairs but only {available} available")]
    NotEnoughCandidates { requested: usize, available: usize },

    #[error("degenerate retain set ({strategy}): retain set lacks one treatment class")]
    DegenerateRetain { strategy: &'static str },

    #[error("forget set is empty in both groups")]
    EmptyForgetSet,

    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("value {value} outside [0, 1]")]
    OutOfUnitInterval { value: f64 },

    #[error("kde grids differ")]
    GridMismatch,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::FileNotFound { .. } | Error::Io { .. } => ErrorKind::Io,
            Error::NonFiniteGradient | Error::NumericFailure(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}

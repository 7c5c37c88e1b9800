use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LpError {
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("column {label} has lower bound {lower} above upper bound {upper}")]
    InvalidBounds { label: String, lower: f64, upper: f64 },
    #[error("row {0} has no coefficients")]
    EmptyRow(String),
    #[error("row {row} references column {col} which does not exist")]
    ColumnOutOfRange { row: String, col: usize },
    #[error("row {row} lists column {col} more than once")]
    DuplicateEntry { row: String, col: String },
    #[error("label {0} is used more than once")]
    DuplicateLabel(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("result is not optimal ({0})")]
    NotOptimal(String),
    #[error("solver backend {0:?} is unknown")]
    UnknownBackend(String),
    #[error("solver backend {0:?} is not available in this build")]
    BackendUnavailable(String),
    #[error("external solver failed: {0}")]
    External(String),
}

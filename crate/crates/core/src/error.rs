use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("negative entry at ({row}, {col}): {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}, expected 1")]
    RowSumViolation { row: usize, sum: f64 },
    #[error("probability vector sums to {sum}, expected 1")]
    SumViolation { sum: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square ({rows} rows, row {row} has {len} entries)")]
    NotSquare { rows: usize, row: usize, len: usize },
    #[error("state space must have at least {min} states, got {got}")]
    TooFewStates { min: usize, got: usize },
    #[error("kernel fails the irreducibility/aperiodicity certificates")]
    NotConvergent,
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("unknown dynamics preset `{0}`")]
    UnknownPreset(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invariant violation at `{path}`: {message}")]
    InvariantViolation { path: String, message: String },
    #[error("operation not defined for the {0} model variant")]
    WrongVariant(&'static str),
    #[error("group {group} has no qualified mass (denominator {denominator})")]
    DegenerateGroup { group: usize, denominator: f64 },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("group {group} has no records with a positive label")]
    EmptyQualifiedGroup { group: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Schema(e.to_string())
    }
}

use std::path::PathBuf;

/// Errors shared by every spider crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("inconsistent input: {0}")]
    Consistency(String),
    #[error("value outside domain: {0}")]
    Domain(String),
    #[error("out of range: {0}")]
    Range(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("degenerate statistics: {0}")]
    DegenerateStats(String),
    #[error("undefined denominator: {0}")]
    UndefinedDenominator(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("line {line}: {message}")]
    Ingestion { line: usize, message: String },
    #[error("bad file format in {path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("accounting error: {0}")]
    Accounting(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

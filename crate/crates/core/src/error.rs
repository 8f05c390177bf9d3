use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenetError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("too few rows: got {got}, need at least {min}")]
    TooFewRows { got: usize, min: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("selection failed: {0}")]
    Selection(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, RenetError>;

impl From<std::io::Error> for RenetError {
    fn from(e: std::io::Error) -> Self {
        RenetError::Io(e.to_string())
    }
}

impl From<csv::Error> for RenetError {
    fn from(e: csv::Error) -> Self {
        RenetError::Io(e.to_string())
    }
}

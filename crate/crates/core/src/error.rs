use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// No k-good decomposition could be produced for this instance.
    #[error("infeasible: {reason}")]
    Infeasible {
        reason: String,
        /// Vertex that could not be placed, when there is one.
        witness: Option<usize>,
    },

    #[error("round budget exhausted after {rounds} rounds")]
    BudgetExhausted { rounds: usize },

    #[error("{}: row {row}: {issue}", path.display())]
    Parse {
        path: PathBuf,
        row: u64,
        issue: ParseIssue,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

/// What was wrong with one row of an input file.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseIssue {
    #[error("malformed field `{field}`: {detail}")]
    Malformed { field: String, detail: String },
    #[error("expected {expected} cells, found {found}")]
    WrongWidth { expected: usize, found: usize },
    #[error("category id {y} out of range for {cat_size} categories")]
    CategoryOutOfRange { y: u64, cat_size: usize },
    #[error("{0}")]
    Other(String),
}

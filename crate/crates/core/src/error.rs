use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse grouping used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("label column '{0}' not found in header")]
    MissingLabelColumn(String),
    #[error("non-numeric cell at row {row}, column '{column}': '{value}'")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("non-finite value at row {row}, column '{column}'")]
    NonFinite { row: usize, column: String },
    #[error("invalid PU label at row {row}: '{value}' (expected 0 or 1)")]
    InvalidLabel { row: usize, value: String },
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("dataset has zero rows")]
    EmptyDataset,
    #[error("dataset has no feature columns")]
    NoFeatures,
    #[error("every row is labeled; PU data needs at least one unlabeled row")]
    AllLabeled,
    #[error("no row is labeled; PU data needs at least one labeled positive")]
    AllUnlabeled,
    #[error("ground truth has no relevant feature")]
    EmptyGroundTruth,
    #[error("no ground truth available")]
    NoGroundTruth,
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("feature mask selects no feature")]
    EmptyMask,
    #[error("no labeled data in clustering")]
    NoLabeledData,
    #[error("brute force limited to {max} clusters, got {k}")]
    TooManyClusters { k: usize, max: usize },
    #[error("budget {budget} is below the cheapest feature cost {min_cost}")]
    BudgetBelowMinCost { budget: f64, min_cost: f64 },
    #[error("invalid costs: {0}")]
    InvalidCosts(String),
    #[error("objective returned a non-finite score ({0})")]
    NonFiniteScore(f64),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_)
            | Error::InvalidSpec(_)
            | Error::BudgetBelowMinCost { .. }
            | Error::InvalidCosts(_)
            | Error::EmptyMask
            | Error::TooManyClusters { .. } => ErrorKind::Config,
            Error::MissingFile(_)
            | Error::MissingLabelColumn(_)
            | Error::NonNumeric { .. }
            | Error::NonFinite { .. }
            | Error::InvalidLabel { .. }
            | Error::RaggedRow { .. }
            | Error::EmptyDataset
            | Error::NoFeatures
            | Error::AllLabeled
            | Error::AllUnlabeled
            | Error::EmptyGroundTruth
            | Error::NoGroundTruth
            | Error::NoLabeledData
            | Error::LengthMismatch { .. }
            | Error::Csv(_)
            | Error::Json(_) => ErrorKind::Data,
            Error::NonFiniteScore(_) | Error::Io(_) => ErrorKind::Internal,
        }
    }
}

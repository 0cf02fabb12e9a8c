//! Crate-wide error type.
//!
//! Every fallible operation in this crate returns [`Error`]. Variants are
//! grouped by what went wrong rather than where: input-shape problems,
//! numeric contract violations, and oversized search spaces are distinct
//! because callers (notably the CLI) map them to different exit codes.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The budget k is outside `[1, m]`.
    #[error("invalid budget: k={k} must satisfy 1 <= k <= m={m}")]
    InvalidBudget { k: usize, m: usize },

    /// Malformed numeric input: NaN scores, probabilities outside [0, 1],
    /// negative confusion mass, and similar.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Dimensions of two arguments disagree (row length vs label count, ...).
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A marginal-probability vector or matrix violates its contract.
    #[error("invalid marginals: {0}")]
    InvalidMarginals(String),

    /// A prediction does not carry exactly k positive labels, or a confusion
    /// tensor's false-positive + true-positive mass does not add up to k.
    #[error("budget violation: {0}")]
    BudgetViolation(String),

    /// A discrete distribution has invalid weights or marginals.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// Mixture weights are negative or do not sum to one.
    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    /// A metric that is not a plain binary confusion-matrix measure was used
    /// where only such measures are allowed (e.g. micro-averaging).
    #[error("not a binary confusion-matrix measure: {0}")]
    NotABinaryMeasure(String),

    /// Metric or strategy name that the parser does not recognise.
    #[error("unsupported metric or strategy: {0}")]
    Unsupported(String),

    /// A serialized classifier fails validation on load.
    #[error("invalid classifier: {0}")]
    InvalidClassifier(String),

    /// A dataset split cannot be performed (empty part, bad ratio).
    #[error("invalid split: {0}")]
    InvalidSplit(String),

    /// Brute-force enumeration would exceed the configured assignment limit.
    #[error("search space too large: {0}")]
    SearchSpaceTooLarge(String),

    /// A text file failed to parse; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Convenience constructor for parse errors.
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}

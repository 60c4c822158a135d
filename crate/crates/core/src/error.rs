use thiserror::Error;

use crate::family::SubsetFamily;

/// A parameter failed validation. `field` names the offending input so
/// callers (the CLI in particular) can report it verbatim.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid `{field}`: {reason}")]
pub struct ParamError {
    pub field: &'static str,
    pub reason: String,
}

impl ParamError {
    pub fn new(field: &'static str, reason: impl Into<String>) -> Self {
        Self {
            field,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Param(#[from] ParamError),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("n = {n} exceeds the {engine} guard of {limit} rows{hint}")]
    TooManyRows {
        engine: &'static str,
        n: usize,
        limit: usize,
        hint: &'static str,
    },

    #[error("meet-in-the-middle tables need ~{estimate} bytes, budget is {budget}")]
    MemoryBudget { estimate: u64, budget: u64 },

    #[error("coverage grid needs {required} points, budget is {budget}")]
    GridBudget { required: u64, budget: u64 },

    #[error(
        "no family of {requested} subsets met the intersection cap {cap} within {attempts} attempts \
         ({rejected_pairs} violating pairs seen)"
    )]
    CapUnachievable {
        requested: usize,
        cap: usize,
        attempts: usize,
        rejected_pairs: u64,
        best: Box<SubsetFamily>,
    },

    #[error("walk frontier reached {size} points, budget is {budget}; use a larger dedup cell")]
    FrontierBudget {
        size: usize,
        budget: usize,
        frontier: Box<crate::walks::WalkFrontier>,
    },

    #[error("malformed matrix data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

/// Errors shared across the word, tensor, norm and free-operator layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid letter {letter}: must be nonzero with |letter| <= {rank}")]
    InvalidLetter { letter: i64, rank: usize },
    #[error("rank mismatch: {left} vs {right}")]
    RankMismatch { left: usize, right: usize },
    #[error("factor count mismatch: {left} vs {right}")]
    FactorMismatch { left: usize, right: usize },
    #[error("multi-index {index:?} out of range for alphabet size {alphabet} and degree {degree}")]
    IndexOutOfRange {
        index: Vec<usize>,
        alphabet: usize,
        degree: usize,
    },
    #[error("tensor shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("duplicate index {0:?} in tensor file")]
    DuplicateIndex(Vec<usize>),
    #[error("coefficient matrix is not {m}x{m}")]
    NonSquareMatrix { m: usize },
    #[error("malformed tensor file: {0}")]
    Schema(String),
    #[error("dense matricization too large: {rows} x {cols} exceeds cap {cap}")]
    TooLarge { rows: usize, cols: usize, cap: usize },
    #[error("work budget exceeded: visited {visited} nodes, budget {budget}")]
    BudgetExceeded { visited: u64, budget: u64 },
    #[error("ball of rank {rank}, radius {radius} has {size} words, exceeds cap {cap}")]
    BallTooLarge {
        rank: usize,
        radius: usize,
        size: u128,
        cap: usize,
    },
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("exponent must satisfy p >= 1, got {0}")]
    BadExponent(f64),
    #[error("operation requires {required}, got p = {got}")]
    UnsupportedExponent { required: &'static str, got: String },
    #[error("duplicate words in operator; use the moment oracle instead of the p=2 shortcut")]
    DuplicateWords,
    #[error("sign list has length {got}, expected {expected}")]
    SignLength { got: usize, expected: usize },
    #[error("operation requires a single free group, got a product of {0} factors")]
    NotSingleGroup(usize),
    #[error("missing word for supported index {0:?}")]
    MissingWord(Vec<usize>),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("ranking is not a permutation of 0..{m}: {order:?}")]
    InvalidRanking { order: Vec<usize>, m: usize },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("not a permutation of 0..{len}: {perm:?}")]
    InvalidPermutation { perm: Vec<usize>, len: usize },
    #[error("{what} = {value} outside [{min}, {max}]")]
    OutOfBounds {
        what: &'static str,
        value: usize,
        min: usize,
        max: usize,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown {kind} name `{name}`")]
    UnknownName { kind: &'static str, name: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("only {found} of {wanted} sampled profiles were applicable after {attempts} attempts")]
    TooFewApplicable {
        wanted: usize,
        found: usize,
        attempts: usize,
    },
}

pub type Result<T> = std::result::Result<T, CoreError>;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("constraint row {0} is all zero")]
    ZeroRow(usize),
    #[error("non-finite coefficient or right-hand side")]
    NonFinite,
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

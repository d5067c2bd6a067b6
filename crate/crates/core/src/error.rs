use thiserror::Error;

/// Errors raised by the solvers and the instance layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("deadline cannot be met: {0}")]
    InfeasibleDeadline(String),

    #[error("instance too large for exhaustive search: {size} > {cap}")]
    InstanceTooLarge { size: usize, cap: usize },

    #[error("not enough processors: {needed} needed, {available} available")]
    InsufficientProcessors { needed: usize, available: usize },

    #[error("no duplication speed at or below frel for task weight {weight}")]
    NoRoot { weight: f64 },

    #[error("pinned executions leave no time for the remaining duplicated tasks")]
    DegenerateDenominator,

    #[error("instance kind does not match the requested algorithm: {0}")]
    KindMismatch(String),

    #[error("algorithm not applicable: {0}")]
    NotApplicable(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

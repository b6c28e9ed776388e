use thiserror::Error;

use crate::krylov::KrylovError;
use crate::sparse::SparseError;

/// Errors raised while building or applying smoothers, AMG and MGR hierarchies.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("zero diagonal at row {row} ({context})")]
    ZeroDiagonal { context: &'static str, row: usize },
    #[error("block {block} is singular")]
    SingularBlock {
        block: usize,
        #[source]
        source: SparseError,
    },
    #[error("invalid dof partition: {0}")]
    Partition(String),
    #[error("ideal transfer operators need A_FF inverse: {0}")]
    IdealUnavailable(String),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Krylov(#[from] KrylovError),
}

pub type Result<T> = std::result::Result<T, SolverError>;

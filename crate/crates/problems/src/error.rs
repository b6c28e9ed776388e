use mgrkit_core::{SolverError, SparseError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("degenerate geometry: {0}")]
    Geometry(String),
    #[error("boundary condition: {0}")]
    Boundary(String),
    #[error("newton driver: {0}")]
    Newton(String),
    #[error("bundle {path}: {message}")]
    Bundle { path: String, message: String },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ProblemError>;

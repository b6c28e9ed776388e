use mgrkit_core::{SolverError, SparseError};
use mgrkit_problems::ProblemError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid config {path}: {message}")]
    Config { path: String, message: String },
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error("verification failed: {0}")]
    VerifyFailed(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 0 success, 1 non-convergence or failed verification, 2 usage or
    /// configuration error, 3 internal error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::NotConverged(_) | CliError::VerifyFailed(_) => 1,
            CliError::Usage(_) | CliError::Config { .. } => 2,
            CliError::Problem(ProblemError::Config(_) | ProblemError::Boundary(_) | ProblemError::Bundle { .. }) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

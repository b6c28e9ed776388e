//! Building blocks for multigrid-reduction (MGR) preconditioning of block
//! sparse systems.
//!
//! The crate is organized bottom-up:
//!
//! * [`sparse`]: CSR and dense matrices, dense LU, Matrix Market I/O.
//! * [`krylov`]: right-preconditioned restarted GMRES.
//! * [`relax`]: Jacobi, hybrid L1 Gauss-Seidel and exact block smoothers.
//! * [`amg`]: classical AMG V-cycle, scalar or unknown-based.
//! * [`mgr`]: field-based C/F reduction, transfer operators and the
//!   multilevel MGR V-cycle.

pub mod amg;
mod error;
pub mod krylov;
pub mod mgr;
pub mod relax;
pub mod sparse;

pub use error::{Result, SolverError};
pub use krylov::{gmres, KrylovConfig, LinearOperator, SolveReport};
pub use sparse::{DenseLu, DenseMatrix, IndexSet, SparseError, SparseMatrix};

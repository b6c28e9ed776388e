//! Experiment driver for MGR preconditioners: problem generation, single
//! solves, refinement studies and the oracle suite.
//!
//! Configs and strategies are JSON, matrices and vectors Matrix Market,
//! reports CSV plus JSON.

mod error;
pub mod problem;
pub mod report;
pub mod run;
pub mod verify;

pub use error::{CliError, Result};

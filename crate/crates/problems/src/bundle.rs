//! On-disk problem bundles: matrix, right-hand side, dof labels, metadata.
//!
//! A bundle directory holds `matrix.mtx`, `rhs.mtx`, `labels.json` (a
//! serialized [`DofPartition`]) and `meta.json`.

use std::fs;
use std::path::Path;

use mgrkit_core::mgr::DofPartition;
use mgrkit_core::sparse::{mm_read, mm_read_vector, mm_write, mm_write_vector};
use mgrkit_core::SparseMatrix;

use crate::error::{ProblemError, Result};

pub const MATRIX_FILE: &str = "matrix.mtx";
pub const RHS_FILE: &str = "rhs.mtx";
pub const LABELS_FILE: &str = "labels.json";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone)]
pub struct ProblemBundle {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub partition: DofPartition,
    pub meta: serde_json::Value,
}

fn bundle_err(path: &Path, message: impl ToString) -> ProblemError {
    ProblemError::Bundle {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

impl ProblemBundle {
    pub fn new(matrix: SparseMatrix, rhs: Vec<f64>, partition: DofPartition, meta: serde_json::Value) -> Result<Self> {
        let b = Self {
            matrix,
            rhs,
            partition,
            meta,
        };
        b.check()?;
        Ok(b)
    }

    fn check(&self) -> Result<()> {
        let n = self.matrix.nrows();
        if !self.matrix.is_square() || self.rhs.len() != n || self.partition.len() != n {
            return Err(ProblemError::Config(format!(
                "bundle shapes disagree: matrix {}x{}, rhs {}, labels {}",
                n,
                self.matrix.ncols(),
                self.rhs.len(),
                self.partition.len()
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        mm_write(dir.join(MATRIX_FILE), &self.matrix)?;
        mm_write_vector(dir.join(RHS_FILE), &self.rhs)?;
        let labels = serde_json::to_string(&self.partition).map_err(|e| bundle_err(dir, e))?;
        fs::write(dir.join(LABELS_FILE), labels)?;
        let meta = serde_json::to_string_pretty(&self.meta).map_err(|e| bundle_err(dir, e))?;
        fs::write(dir.join(META_FILE), meta)?;
        Ok(())
    }

    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(bundle_err(dir, "not a directory"));
        }
        let matrix = mm_read(dir.join(MATRIX_FILE))?;
        let rhs = mm_read_vector(dir.join(RHS_FILE))?;
        let labels_path = dir.join(LABELS_FILE);
        let partition: DofPartition = serde_json::from_str(&fs::read_to_string(&labels_path)?)
            .map_err(|e| bundle_err(&labels_path, e))?;
        let meta_path = dir.join(META_FILE);
        let meta = match fs::read_to_string(&meta_path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| bundle_err(&meta_path, e))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => serde_json::Value::Null,
            Err(e) => return Err(e.into()),
        };
        let b = Self {
            matrix,
            rhs,
            partition,
            meta,
        };
        b.check()?;
        Ok(b)
    }
}

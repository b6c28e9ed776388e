//! Generators for the block linear systems that MGR strategies are tested on.
//!
//! * [`mfd`]: compressible single-phase flow with a hybrid mimetic
//!   discretization, full `(w, p, π)` and condensed `(p, π)` forms.
//! * [`comp`]: synthetic compositional-flow Jacobians with multi-segment wells.
//! * [`frac`]: plane-strain hydraulic-fracture equilibrium systems.
//!
//! Every generator is deterministic for a fixed seed and can emit a
//! [`ProblemBundle`] for the command-line tools.

pub mod bundle;
pub mod comp;
mod error;
pub mod frac;
pub mod mesh;
pub mod mfd;

pub use bundle::ProblemBundle;
pub use error::{ProblemError, Result};

use mgrkit_core::SparseMatrix;

/// Assembles a block matrix from `(block row, block col, block, scale)`
/// entries; `rows`/`cols` give the block sizes.
pub fn stack_blocks(rows: &[usize], cols: &[usize], blocks: &[(usize, usize, &SparseMatrix, f64)]) -> Result<SparseMatrix> {
    let offset = |sizes: &[usize]| -> Vec<usize> {
        let mut o = vec![0];
        for s in sizes {
            o.push(o.last().unwrap() + s);
        }
        o
    };
    let (ro, co) = (offset(rows), offset(cols));
    let mut trip = Vec::new();
    for &(bi, bj, m, s) in blocks {
        if m.nrows() != rows[bi] || m.ncols() != cols[bj] {
            return Err(ProblemError::Config(format!(
                "block ({bi},{bj}) is {}x{}, expected {}x{}",
                m.nrows(),
                m.ncols(),
                rows[bi],
                cols[bj]
            )));
        }
        trip.extend(m.triplets().map(|(i, j, v)| (ro[bi] + i, co[bj] + j, s * v)));
    }
    Ok(SparseMatrix::from_triplets(ro[rows.len()], co[cols.len()], &trip)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stacks_with_scaling() {
        let i2 = SparseMatrix::identity(2);
        let r = SparseMatrix::from_dense_rows(&[vec![1.0, 2.0]]).unwrap();
        let m = stack_blocks(&[2, 1], &[2], &[(0, 0, &i2, 1.0), (1, 0, &r, -1.0)]).unwrap();
        assert_eq!(m.to_dense().row(2), &[-1.0, -2.0]);
        assert!(stack_blocks(&[1], &[2], &[(0, 0, &i2, 1.0)]).is_err());
    }
}

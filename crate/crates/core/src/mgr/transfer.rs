//! Interpolation, restriction and coarse operators from a C/F split.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::sparse::{matmul, DenseMatrix, IndexSet, SparseMatrix};

/// Largest F-block inverted by a single dense LU for ideal transfers.
pub const MAX_DENSE_IDEAL: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpKind {
    /// `−A_FF⁻¹ A_FC`.
    Ideal,
    /// `−diag(A_FF)⁻¹ A_FC`.
    Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestrictKind {
    /// `[0 I]`.
    Injection,
    /// `[−A_CF diag(A_FF)⁻¹, I]`.
    Jacobi,
    /// `[−A_CF A_FF⁻¹, I]`.
    Ideal,
}

/// `A_FF⁻¹ B` for a sparse right-hand-side block `B`.
///
/// Diagonal `A_FF` is inverted exactly. Otherwise the solve runs per diagonal
/// block of `layout`, or as one dense LU when `|F| ≤ MAX_DENSE_IDEAL`.
pub fn ff_solve(aff: &SparseMatrix, b: &SparseMatrix, layout: Option<&[usize]>) -> Result<SparseMatrix> {
    let n = aff.nrows();
    if aff.is_structurally_diagonal() {
        let inv = aff.inverse_diagonal()?;
        return Ok(b.scale_rows(&inv)?);
    }
    let sizes: Vec<usize> = match layout {
        Some(l) => {
            if l.iter().sum::<usize>() != n {
                return Err(SolverError::InvalidConfig(format!(
                    "F-block layout does not sum to |F| = {n}"
                )));
            }
            l.to_vec()
        }
        None if n <= MAX_DENSE_IDEAL => vec![n],
        None => {
            return Err(SolverError::IdealUnavailable(format!(
                "A_FF of size {n} is neither diagonal nor given a block layout (dense limit {MAX_DENSE_IDEAL})"
            )))
        }
    };
    let mut block_of = vec![0usize; n];
    let mut starts = Vec::with_capacity(sizes.len());
    let mut s = 0;
    for (k, &len) in sizes.iter().enumerate() {
        starts.push(s);
        block_of[s..s + len].iter_mut().for_each(|b| *b = k);
        s += len;
    }
    for (i, j, v) in aff.triplets() {
        if block_of[i] != block_of[j] && v != 0.0 {
            return Err(SolverError::IdealUnavailable(format!(
                "A_FF has entry ({i}, {j}) outside its declared diagonal blocks"
            )));
        }
    }

    let mut trip = Vec::new();
    for (k, &len) in sizes.iter().enumerate() {
        let s = starts[k];
        let mut block = DenseMatrix::zeros(len, len);
        for i in s..s + len {
            let (cols, vals) = aff.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                block[(i - s, j - s)] = v;
            }
        }
        let lu = block
            .lu()
            .map_err(|source| SolverError::SingularBlock { block: k, source })?;
        let mut by_col: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
        for i in s..s + len {
            let (cols, vals) = b.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                by_col.entry(j).or_default().push((i - s, v));
            }
        }
        let mut rhs = vec![0.0; len];
        for (j, entries) in by_col {
            rhs.iter_mut().for_each(|v| *v = 0.0);
            for (r, v) in entries {
                rhs[r] = v;
            }
            lu.solve_in_place(&mut rhs);
            for (r, &v) in rhs.iter().enumerate() {
                if v != 0.0 {
                    trip.push((s + r, j, v));
                }
            }
        }
    }
    Ok(SparseMatrix::from_triplets(n, b.ncols(), &trip)?)
}

fn jacobi_inverse(aff: &SparseMatrix) -> Result<Vec<f64>> {
    aff.inverse_diagonal().map_err(|e| match e {
        crate::sparse::SparseError::ZeroDiagonal { row } => SolverError::ZeroDiagonal {
            context: "diag(A_FF)",
            row,
        },
        other => other.into(),
    })
}

/// Stacks `[X_F; I_C]` into global order: row `f[k]` takes row `k` of
/// `x_f` (columns indexed by C), row `c[k]` is the unit vector `e_k`.
fn assemble_prolongation(n: usize, f: &IndexSet, c: &IndexSet, x_f: &SparseMatrix) -> Result<SparseMatrix> {
    let mut trip = Vec::with_capacity(x_f.nnz() + c.len());
    for (k, &i) in c.as_slice().iter().enumerate() {
        trip.push((i, k, 1.0));
    }
    for (k, j, v) in x_f.triplets() {
        trip.push((f.as_slice()[k], j, v));
    }
    Ok(SparseMatrix::from_triplets(n, c.len(), &trip)?)
}

/// MGR interpolation `P` (`n × |C|`) for the split `(F, C)`.
pub fn build_interp(
    a: &SparseMatrix,
    f: &IndexSet,
    c: &IndexSet,
    kind: InterpKind,
    ff_layout: Option<&[usize]>,
) -> Result<SparseMatrix> {
    let aff = a.extract(f, f)?;
    let afc = a.extract(f, c)?;
    let x = match kind {
        InterpKind::Jacobi => afc.scale_rows(&jacobi_inverse(&aff)?)?,
        InterpKind::Ideal => ff_solve(&aff, &afc, ff_layout)?,
    };
    assemble_prolongation(a.nrows(), f, c, &x.scaled(-1.0))
}

/// MGR restriction `R` (`|C| × n`) for the split `(F, C)`.
pub fn build_restrict(
    a: &SparseMatrix,
    f: &IndexSet,
    c: &IndexSet,
    kind: RestrictKind,
    ff_layout: Option<&[usize]>,
) -> Result<SparseMatrix> {
    let n = a.nrows();
    let x = match kind {
        RestrictKind::Injection => SparseMatrix::zeros(f.len(), c.len()),
        RestrictKind::Jacobi => {
            let aff = a.extract(f, f)?;
            a.extract(c, f)?.transpose().scale_rows(&jacobi_inverse(&aff)?)?
        }
        RestrictKind::Ideal => {
            let aff_t = a.extract(f, f)?.transpose();
            ff_solve(&aff_t, &a.extract(c, f)?.transpose(), ff_layout)?
        }
    };
    // R = Pᵀ-shaped assembly of [−(A_FFᵀ)⁻¹ A_CFᵀ; I] transposed.
    Ok(assemble_prolongation(n, f, c, &x.scaled(-1.0))?.transpose())
}

/// Petrov–Galerkin coarse operator `R A P`.
pub fn coarse_operator(a: &SparseMatrix, r: &SparseMatrix, p: &SparseMatrix) -> Result<SparseMatrix> {
    Ok(matmul(r, &matmul(a, p)?)?)
}

/// `A_CC − A_CF diag(A_FF)⁻¹ A_FC`, equal to `R A P` for Jacobi interpolation
/// with injection restriction.
pub fn jacobi_schur(a: &SparseMatrix, f: &IndexSet, c: &IndexSet) -> Result<SparseMatrix> {
    let aff = a.extract(f, f)?;
    let scaled = a.extract(f, c)?.scale_rows(&jacobi_inverse(&aff)?)?;
    let prod = matmul(&a.extract(c, f)?, &scaled)?;
    Ok(a.extract(c, c)?.add_scaled(-1.0, &prod)?)
}

/// Dense Schur complement `A_CC − A_CF A_FF⁻¹ A_FC` (small systems only).
pub fn dense_schur(a: &SparseMatrix, f: &IndexSet, c: &IndexSet) -> Result<DenseMatrix> {
    let x = ff_solve(&a.extract(f, f)?, &a.extract(f, c)?, None)?;
    let prod = matmul(&a.extract(c, f)?, &x)?;
    Ok(a.extract(c, c)?.add_scaled(-1.0, &prod)?.to_dense())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn a2() -> SparseMatrix {
        SparseMatrix::from_dense_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap()
    }

    fn a3() -> SparseMatrix {
        SparseMatrix::from_dense_rows(&[vec![2.0, 0.0, 1.0], vec![0.0, 4.0, 2.0], vec![1.0, 2.0, 8.0]]).unwrap()
    }

    fn sets(n: usize, f: &[usize]) -> (IndexSet, IndexSet) {
        let f = IndexSet::new(f.to_vec(), n).unwrap();
        let c = f.complement(n);
        (f, c)
    }

    #[test]
    fn interp_examples() {
        let (f, c) = sets(2, &[0]);
        let p = build_interp(&a2(), &f, &c, InterpKind::Jacobi, None).unwrap();
        assert_eq!(p.to_dense().values(), &[-0.25, 1.0]);

        let (f, c) = sets(3, &[0, 1]);
        let p = build_interp(&a3(), &f, &c, InterpKind::Ideal, None).unwrap();
        assert_eq!(p.to_dense().values(), &[-0.5, -0.5, 1.0]);

        let decoupled = SparseMatrix::diagonal(&[1.0, 2.0, 3.0]);
        let p = build_interp(&decoupled, &f, &c, InterpKind::Ideal, None).unwrap();
        assert_eq!(p.to_dense().values(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn restrict_examples() {
        let (f, c) = sets(2, &[0]);
        let r = build_restrict(&a2(), &f, &c, RestrictKind::Jacobi, None).unwrap();
        assert_eq!(r.to_dense().values(), &[-0.25, 1.0]);
        let inj = build_restrict(&a2(), &f, &c, RestrictKind::Injection, None).unwrap();
        assert_eq!(inj.spmv(&[7.0, 9.0]).unwrap(), vec![9.0]);

        let (f, c) = sets(3, &[0, 1]);
        let r = build_restrict(&a3(), &f, &c, RestrictKind::Ideal, None).unwrap();
        assert_eq!(r.to_dense().values(), &[-0.5, -0.5, 1.0]);
    }

    #[test]
    fn coarse_examples() {
        let (f, c) = sets(2, &[0]);
        let a = a2();
        let p = build_interp(&a, &f, &c, InterpKind::Ideal, None).unwrap();
        let r = build_restrict(&a, &f, &c, RestrictKind::Ideal, None).unwrap();
        assert_eq!(coarse_operator(&a, &r, &p).unwrap().to_dense().values(), &[2.75]);

        let (f, c) = sets(3, &[0, 1]);
        let a = a3();
        let p = build_interp(&a, &f, &c, InterpKind::Ideal, None).unwrap();
        let r = build_restrict(&a, &f, &c, RestrictKind::Ideal, None).unwrap();
        assert_eq!(coarse_operator(&a, &r, &p).unwrap().to_dense().values(), &[6.5]);

        let bd = SparseMatrix::from_dense_rows(&[vec![2.0, 0.0], vec![0.0, 5.0]]).unwrap();
        let (f, c) = sets(2, &[0]);
        let p = build_interp(&bd, &f, &c, InterpKind::Ideal, None).unwrap();
        let r = build_restrict(&bd, &f, &c, RestrictKind::Ideal, None).unwrap();
        assert_eq!(coarse_operator(&bd, &r, &p).unwrap().to_dense().values(), &[5.0]);
    }

    #[test]
    fn zero_diagonal_is_rejected_for_jacobi() {
        let a = SparseMatrix::from_dense_rows(&[vec![0.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let (f, c) = sets(2, &[0]);
        assert!(matches!(
            build_interp(&a, &f, &c, InterpKind::Jacobi, None),
            Err(SolverError::ZeroDiagonal { .. })
        ));
    }

    #[test]
    fn layout_must_match_block_structure() {
        let a = SparseMatrix::from_dense_rows(&[
            vec![4.0, 1.0, 0.0, 1.0],
            vec![1.0, 4.0, 0.0, 1.0],
            vec![0.0, 0.0, 4.0, 1.0],
            vec![1.0, 1.0, 1.0, 4.0],
        ])
        .unwrap();
        let (f, c) = sets(4, &[0, 1, 2]);
        let blocked = build_interp(&a, &f, &c, InterpKind::Ideal, Some(&[2, 1])).unwrap();
        let dense = build_interp(&a, &f, &c, InterpKind::Ideal, None).unwrap();
        assert!(blocked.max_abs_diff(&dense).unwrap() <= 1e-15);
        assert!(matches!(
            build_interp(&a, &f, &c, InterpKind::Ideal, Some(&[1, 2])),
            Err(SolverError::IdealUnavailable(_))
        ));
    }

    fn random_system(entries: &[(usize, usize, f64)], n: usize) -> SparseMatrix {
        let mut t: Vec<(usize, usize, f64)> = entries.iter().map(|&(i, j, v)| (i % n, j % n, v)).collect();
        for i in 0..n {
            t.push((i, i, 6.0 + (i % 3) as f64));
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn ideal_coarse_matches_dense_schur(
            entries in prop::collection::vec((0usize..30, 0usize..30, -1.0f64..1.0), 60..200),
            mask in prop::collection::vec(any::<bool>(), 30),
        ) {
            let n = 30;
            let a = random_system(&entries, n);
            let f = IndexSet::from_mask(&mask);
            prop_assume!(!f.is_empty() && f.len() < n);
            let c = f.complement(n);
            let p = build_interp(&a, &f, &c, InterpKind::Ideal, None).unwrap();
            let r = build_restrict(&a, &f, &c, RestrictKind::Ideal, None).unwrap();
            let s = coarse_operator(&a, &r, &p).unwrap().to_dense();

            // Brute force: invert A_FF column by column with a fresh dense LU.
            let dense = a.to_dense();
            let nf = f.len();
            let mut aff = DenseMatrix::zeros(nf, nf);
            for (p_, &i) in f.as_slice().iter().enumerate() {
                for (q, &j) in f.as_slice().iter().enumerate() {
                    aff[(p_, q)] = dense[(i, j)];
                }
            }
            let lu = aff.lu().unwrap();
            let scale = dense.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (ci, &gi) in c.as_slice().iter().enumerate() {
                for (cj, &gj) in c.as_slice().iter().enumerate() {
                    let col: Vec<f64> = f.as_slice().iter().map(|&k| dense[(k, gj)]).collect();
                    let y = lu.solve(&col).unwrap();
                    let corr: f64 = f.as_slice().iter().zip(&y).map(|(&k, yk)| dense[(gi, k)] * yk).sum();
                    let expect = dense[(gi, gj)] - corr;
                    prop_assert!((s[(ci, cj)] - expect).abs() <= 1e-12 * scale);
                }
            }
        }

        #[test]
        fn jacobi_injection_rap_equals_direct_formula(
            entries in prop::collection::vec((0usize..25, 0usize..25, -1.0f64..1.0), 40..150),
            mask in prop::collection::vec(any::<bool>(), 25),
        ) {
            let n = 25;
            let a = random_system(&entries, n);
            let f = IndexSet::from_mask(&mask);
            prop_assume!(!f.is_empty() && f.len() < n);
            let c = f.complement(n);
            let p = build_interp(&a, &f, &c, InterpKind::Jacobi, None).unwrap();
            let r = build_restrict(&a, &f, &c, RestrictKind::Injection, None).unwrap();
            let rap = coarse_operator(&a, &r, &p).unwrap();
            let direct = jacobi_schur(&a, &f, &c).unwrap();
            prop_assert!(rap.max_abs_diff(&direct).unwrap() <= 1e-12 * a.max_abs());
        }
    }
}

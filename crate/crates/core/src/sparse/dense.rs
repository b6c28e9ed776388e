use std::ops::{Index, IndexMut};

use super::{check_dim, Result, SparseError};

/// Pivots with magnitude at or below this value mark the matrix singular.
pub const PIVOT_THRESHOLD: f64 = 1e-300;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            values: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(nrows: usize, ncols: usize, values: Vec<f64>) -> Result<Self> {
        check_dim("dense value count", nrows * ncols, values.len())?;
        Ok(Self {
            nrows,
            ncols,
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(nrows * ncols);
        for r in rows {
            check_dim("dense row length", ncols, r.len())?;
            values.extend_from_slice(r);
        }
        Ok(Self {
            nrows,
            ncols,
            values,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("dense matvec input length", self.ncols, x.len())?;
        Ok((0..self.nrows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim("dense matmul inner dimension", self.ncols, other.nrows)?;
        let mut out = DenseMatrix::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.ncols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn lu(&self) -> Result<DenseLu> {
        DenseLu::factor(self)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.values[i * self.ncols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.values[i * self.ncols + j]
    }
}

/// LU factorization with partial pivoting, `P A = L U`, stored compactly.
#[derive(Debug, Clone)]
pub struct DenseLu {
    factors: DenseMatrix,
    pivots: Vec<usize>,
}

impl DenseLu {
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        check_dim("LU needs a square matrix", a.nrows, a.ncols)?;
        let n = a.nrows;
        let mut lu = a.clone();
        let mut pivots = Vec::with_capacity(n);
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pmax > PIVOT_THRESHOLD) {
                return Err(SparseError::Singular {
                    column: k,
                    pivot: pmax.max(0.0),
                });
            }
            pivots.push(p);
            if p != k {
                for j in 0..n {
                    lu.values.swap(k * n + j, p * n + j);
                }
            }
            let inv = 1.0 / lu[(k, k)];
            for i in (k + 1)..n {
                let l = lu[(i, k)] * inv;
                lu[(i, k)] = l;
                if l != 0.0 {
                    let (head, tail) = lu.values.split_at_mut(i * n);
                    let pivot_row = &head[k * n..(k + 1) * n];
                    let row = &mut tail[..n];
                    for j in (k + 1)..n {
                        row[j] -= l * pivot_row[j];
                    }
                }
            }
        }
        Ok(Self {
            factors: lu,
            pivots,
        })
    }

    pub fn dim(&self) -> usize {
        self.factors.nrows
    }

    pub fn factors(&self) -> &DenseMatrix {
        &self.factors
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_dim("LU rhs length", self.dim(), b.len())?;
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    /// Overwrites `x` (holding the right-hand side) with the solution.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        let f = &self.factors;
        for (k, &p) in self.pivots.iter().enumerate() {
            x.swap(k, p);
        }
        for i in 0..n {
            let row = f.row(i);
            let mut s = x[i];
            for j in 0..i {
                s -= row[j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let row = f.row(i);
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= row[j] * x[j];
            }
            x[i] = s / row[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::norm2;
    use proptest::prelude::*;

    fn relative_residual(a: &DenseMatrix, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.mul_vec(x).unwrap();
        let r: Vec<f64> = ax.iter().zip(b).map(|(u, v)| u - v).collect();
        norm2(&r) / norm2(b)
    }

    #[test]
    fn lu_examples() {
        let lu = DenseMatrix::identity(2).lu().unwrap();
        assert_eq!(lu.solve(&[3.0, 7.0]).unwrap(), vec![3.0, 7.0]);

        let a = DenseMatrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x = a.lu().unwrap().solve(&[1.0, 0.0]).unwrap();
        assert!((x[0] - 3.0 / 11.0).abs() < 1e-15);
        assert!((x[1] + 1.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(a.lu(), Err(SparseError::Singular { column: 1, .. })));
        assert!(DenseMatrix::zeros(2, 3).lu().is_err());
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(a.lu().unwrap().solve(&[2.0, 5.0]).unwrap(), vec![5.0, 2.0]);
    }

    /// Diagonally shifted random matrices keep the condition number moderate.
    fn well_conditioned(n: usize) -> impl Strategy<Value = (DenseMatrix, Vec<f64>)> {
        (
            prop::collection::vec(-1.0f64..1.0, n * n),
            prop::collection::vec(-1.0f64..1.0, n),
        )
            .prop_map(move |(mut v, b)| {
                for i in 0..n {
                    v[i * n + i] += if i % 2 == 0 { n as f64 } else { -(n as f64) };
                }
                (DenseMatrix::from_row_major(n, n, v).unwrap(), b)
            })
    }

    #[test]
    fn random_50_residual() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(50);
        let n = 50;
        let mut a = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = rng.gen_range(-1.0..1.0);
            }
            a[(i, i)] += 10.0;
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = a.lu().unwrap().solve(&b).unwrap();
        assert!(relative_residual(&a, &x, &b) <= 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn lu_residual_bound((a, b) in well_conditioned(12)) {
            prop_assume!(norm2(&b) > 1e-3);
            let x = a.lu().unwrap().solve(&b).unwrap();
            prop_assert!(relative_residual(&a, &x, &b) <= 1e-10);
        }
    }
}

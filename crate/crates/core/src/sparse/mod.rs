//! Compressed-row sparse matrices and the kernels every other module builds on.
//!
//! All operators (blocks, transfer operators, Galerkin coarse grids) are stored
//! as [`SparseMatrix`] in CSR form. Matrices are immutable once built; the
//! kernels here allocate their outputs.

mod dense;
mod index_set;
pub mod matrix_market;

pub use dense::{DenseLu, DenseMatrix, PIVOT_THRESHOLD};
pub use index_set::IndexSet;
pub use matrix_market::{mm_read, mm_read_vector, mm_write, mm_write_vector};

use thiserror::Error;

/// Errors raised by the sparse kernels and the Matrix Market reader.
#[derive(Debug, Error)]
pub enum SparseError {
    #[error("dimension mismatch: {context} (expected {expected}, found {found})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid CSR structure: {0}")]
    InvalidStructure(String),
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("zero or missing diagonal entry at row {row}")]
    ZeroDiagonal { row: usize },
    #[error("matrix is singular: pivot {pivot:e} at column {column}")]
    Singular { column: usize, pivot: f64 },
    #[error("matrix market parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SparseError>;

fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(SparseError::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}

/// Real-valued CSR matrix.
///
/// Column indices are strictly increasing within each row and every stored
/// value is finite. Explicitly stored zeros are allowed (Galerkin products keep
/// cancellation zeros).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Validating constructor.
    pub fn new(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != nrows + 1 {
            return Err(SparseError::InvalidStructure(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                nrows + 1
            )));
        }
        if row_offsets[0] != 0 {
            return Err(SparseError::InvalidStructure(
                "row_offsets[0] must be 0".into(),
            ));
        }
        if col_indices.len() != values.len() || row_offsets[nrows] != values.len() {
            return Err(SparseError::InvalidStructure(
                "row_offsets[nrows], len(col_indices) and len(values) disagree".into(),
            ));
        }
        for row in 0..nrows {
            let (start, end) = (row_offsets[row], row_offsets[row + 1]);
            if start > end {
                return Err(SparseError::InvalidStructure(format!(
                    "row_offsets decreases at row {row}"
                )));
            }
            let cols = &col_indices[start..end];
            for (k, &c) in cols.iter().enumerate() {
                if c >= ncols {
                    return Err(SparseError::IndexOutOfRange {
                        index: c,
                        dim: ncols,
                    });
                }
                if k > 0 && cols[k - 1] >= c {
                    return Err(SparseError::InvalidStructure(format!(
                        "column indices not strictly increasing in row {row}"
                    )));
                }
            }
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(SparseError::InvalidStructure(format!(
                "non-finite value at storage position {pos}"
            )));
        }
        Ok(Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            if r >= nrows {
                return Err(SparseError::IndexOutOfRange { index: r, dim: nrows });
            }
            if c >= ncols {
                return Err(SparseError::IndexOutOfRange { index: c, dim: ncols });
            }
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            cols[next[r]] = c;
            vals[next[r]] = v;
            next[r] += 1;
        }

        let mut row_offsets = Vec::with_capacity(nrows + 1);
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_offsets.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            scratch.clear();
            scratch.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            scratch.sort_by_key(|&(c, _)| c);
            for &(c, v) in &scratch {
                if col_indices.len() > row_offsets[r] && *col_indices.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_indices.push(c);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Self::new(nrows, ncols, row_offsets, col_indices, values)
    }

    /// Converts dense rows to CSR, skipping exact zeros.
    pub fn from_dense_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut trip = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            check_dim("dense row length", ncols, row.len())?;
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &trip)
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    /// Square diagonal matrix; every diagonal position is stored, zeros included.
    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_offsets: vec![0; nrows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[s..e], &self.values[s..e])
    }

    /// Iterates `(row, col, value)` over stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    /// Stored value at `(i, j)`, or zero.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    /// Whether position `(i, j)` is stored (possibly as an explicit zero).
    pub fn has_entry(&self, i: usize, j: usize) -> bool {
        self.row(i).0.binary_search(&j).is_ok()
    }

    /// Diagonal entries; missing entries read as zero.
    pub fn diagonal_values(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`. Each row is summed left to right in storage order.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("spmv input length", self.ncols, x.len())?;
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// Unchecked-length variant of [`spmv`](Self::spmv) writing into `y`.
    #[inline]
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
            let mut acc = 0.0;
            for k in s..e {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *yi = acc;
        }
    }

    /// `r = b - A x`.
    pub fn residual(&self, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        check_dim("residual rhs length", self.nrows, b.len())?;
        let ax = self.spmv(x)?;
        Ok(b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect())
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // Rows are visited in increasing order, so each output row stays sorted.
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                col_indices[next[j]] = i;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_offsets: counts,
            col_indices,
            values,
        }
    }

    /// Returns `alpha * self`.
    pub fn scaled(&self, alpha: f64) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// Returns `self + alpha * other` on the union pattern.
    pub fn add_scaled(&self, alpha: f64, other: &SparseMatrix) -> Result<SparseMatrix> {
        check_dim("add rows", self.nrows, other.nrows)?;
        check_dim("add cols", self.ncols, other.ncols)?;
        let mut row_offsets = Vec::with_capacity(self.nrows + 1);
        let mut col_indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        row_offsets.push(0);
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let take_a = q >= cb.len() || (p < ca.len() && ca[p] < cb[q]);
                let take_b = p >= ca.len() || (q < cb.len() && cb[q] < ca[p]);
                if take_a {
                    col_indices.push(ca[p]);
                    values.push(va[p]);
                    p += 1;
                } else if take_b {
                    col_indices.push(cb[q]);
                    values.push(alpha * vb[q]);
                    q += 1;
                } else {
                    col_indices.push(ca[p]);
                    values.push(va[p] + alpha * vb[q]);
                    p += 1;
                    q += 1;
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Scales row `i` by `d[i]`, i.e. `diag(d) * self`.
    pub fn scale_rows(&self, d: &[f64]) -> Result<SparseMatrix> {
        check_dim("row scaling length", self.nrows, d.len())?;
        let mut out = self.clone();
        for i in 0..self.nrows {
            let (s, e) = (out.row_offsets[i], out.row_offsets[i + 1]);
            out.values[s..e].iter_mut().for_each(|v| *v *= d[i]);
        }
        Ok(out)
    }

    /// Drops stored entries with `|a_ij| <= tol`; diagonal entries are always kept.
    pub fn pruned(&self, tol: f64) -> SparseMatrix {
        let mut row_offsets = Vec::with_capacity(self.nrows + 1);
        let mut col_indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_offsets.push(0);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if i == j || v.abs() > tol {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Submatrix `A[rows, cols]`, reindexed in the order of the index sets.
    pub fn extract(&self, rows: &IndexSet, cols: &IndexSet) -> Result<SparseMatrix> {
        if let Some(&last) = rows.as_slice().last() {
            if last >= self.nrows {
                return Err(SparseError::IndexOutOfRange {
                    index: last,
                    dim: self.nrows,
                });
            }
        }
        if let Some(&last) = cols.as_slice().last() {
            if last >= self.ncols {
                return Err(SparseError::IndexOutOfRange {
                    index: last,
                    dim: self.ncols,
                });
            }
        }
        const NONE: usize = usize::MAX;
        let mut new_col = vec![NONE; self.ncols];
        for (k, &j) in cols.as_slice().iter().enumerate() {
            new_col[j] = k;
        }
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for &i in rows.as_slice() {
            let (cs, vs) = self.row(i);
            for (&j, &v) in cs.iter().zip(vs) {
                let nj = new_col[j];
                if nj != NONE {
                    col_indices.push(nj);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        // Index sets are increasing, so the remapped columns stay sorted.
        Ok(SparseMatrix {
            nrows: rows.len(),
            ncols: cols.len(),
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Diagonal matrix of reciprocal diagonal entries.
    pub fn diag_inverse(&self) -> Result<SparseMatrix> {
        Ok(SparseMatrix::diagonal(&self.inverse_diagonal()?))
    }

    /// Reciprocals of the diagonal; zero or missing entries are an error.
    pub fn inverse_diagonal(&self) -> Result<Vec<f64>> {
        check_dim("diag_inverse needs a square matrix", self.nrows, self.ncols)?;
        (0..self.nrows)
            .map(|i| {
                let d = self.get(i, i);
                if d == 0.0 {
                    Err(SparseError::ZeroDiagonal { row: i })
                } else {
                    Ok(1.0 / d)
                }
            })
            .collect()
    }

    /// Whether every stored off-diagonal entry is absent (explicit zeros count as present).
    pub fn is_structurally_diagonal(&self) -> bool {
        self.triplets().all(|(i, j, _)| i == j)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] = v;
        }
        d
    }

    /// Largest absolute entrywise difference, comparing over the union pattern.
    pub fn max_abs_diff(&self, other: &SparseMatrix) -> Result<f64> {
        Ok(self
            .add_scaled(-1.0, other)?
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs())))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Set of stored positions, useful for pattern comparisons.
    pub fn pattern(&self) -> Vec<(usize, usize)> {
        self.triplets().map(|(i, j, _)| (i, j)).collect()
    }
}

/// Sparse product `A * B` (Gustavson, dense accumulator). Entries that cancel
/// to zero are kept.
pub fn matmul(a: &SparseMatrix, b: &SparseMatrix) -> Result<SparseMatrix> {
    matmul_with_drop(a, b, 0.0)
}

/// Sparse product that drops off-diagonal entries with `|c_ij| < drop_tol`.
/// With the default `drop_tol = 0.0` nothing is dropped.
pub fn matmul_with_drop(a: &SparseMatrix, b: &SparseMatrix, drop_tol: f64) -> Result<SparseMatrix> {
    check_dim("matmul inner dimension", a.ncols, b.nrows)?;
    const UNSET: usize = usize::MAX;
    let mut marker = vec![UNSET; b.ncols];
    let mut accum = vec![0.0; b.ncols];
    let mut row_cols: Vec<usize> = Vec::new();
    let mut row_offsets = Vec::with_capacity(a.nrows + 1);
    let mut col_indices = Vec::new();
    let mut values = Vec::new();
    row_offsets.push(0);
    for i in 0..a.nrows {
        row_cols.clear();
        let (acols, avals) = a.row(i);
        for (&k, &aik) in acols.iter().zip(avals) {
            let (bcols, bvals) = b.row(k);
            for (&j, &bkj) in bcols.iter().zip(bvals) {
                if marker[j] != i {
                    marker[j] = i;
                    accum[j] = aik * bkj;
                    row_cols.push(j);
                } else {
                    accum[j] += aik * bkj;
                }
            }
        }
        row_cols.sort_unstable();
        for &j in &row_cols {
            let v = accum[j];
            if drop_tol > 0.0 && i != j && v.abs() < drop_tol {
                continue;
            }
            col_indices.push(j);
            values.push(v);
        }
        row_offsets.push(col_indices.len());
    }
    SparseMatrix::new(a.nrows, b.ncols, row_offsets, col_indices, values)
}

/// Euclidean norm.
pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

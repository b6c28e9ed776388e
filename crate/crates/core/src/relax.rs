//! Stationary smoothers used for F-relaxation and inside AMG V-cycles.
//!
//! A [`Smoother`] is built once for a fixed matrix and then used either as a
//! stationary iteration on `A x = b` ([`Smoother::sweep`]) or, from a zero
//! initial guess, as a fixed linear approximation of `A⁻¹`
//! ([`Smoother::apply`]).

use serde::{Deserialize, Serialize};

use crate::amg::{AmgConfig, AmgHierarchy};
use crate::error::{Result, SolverError};
use crate::sparse::{DenseLu, DenseMatrix, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmootherKind {
    Jacobi,
    L1Jacobi,
    HybridL1GsForward,
    HybridL1GsBackward,
    BlockJacobiExact,
    AmgVcycle,
    DenseLu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmootherSpec {
    pub kind: SmootherKind,
    pub sweeps: usize,
    /// Jacobi damping factor.
    pub weight: f64,
    /// Diagonal block sizes for `block_jacobi_exact`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_layout: Option<Vec<usize>>,
    /// Contiguous half-open row ranges `[start, end)` for the hybrid L1 smoothers.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<(usize, usize)>>,
    /// AMG settings for `amg_vcycle`; defaults apply when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amg: Option<Box<AmgConfig>>,
}

impl Default for SmootherSpec {
    fn default() -> Self {
        Self::new(SmootherKind::Jacobi)
    }
}

impl SmootherSpec {
    pub fn new(kind: SmootherKind) -> Self {
        Self {
            kind,
            sweeps: 1,
            weight: 1.0,
            block_layout: None,
            partition: None,
            amg: None,
        }
    }

    pub fn jacobi() -> Self {
        Self::new(SmootherKind::Jacobi)
    }

    pub fn dense_lu() -> Self {
        Self::new(SmootherKind::DenseLu)
    }

    pub fn amg(cfg: AmgConfig) -> Self {
        Self {
            amg: Some(Box::new(cfg)),
            ..Self::new(SmootherKind::AmgVcycle)
        }
    }

    pub fn with_sweeps(mut self, sweeps: usize) -> Self {
        self.sweeps = sweeps;
        self
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_partition(mut self, ranges: Vec<(usize, usize)>) -> Self {
        self.partition = Some(ranges);
        self
    }

    pub fn with_block_layout(mut self, layout: Vec<usize>) -> Self {
        self.block_layout = Some(layout);
        self
    }

    /// Checks the smoother settings against a matrix of dimension `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.sweeps == 0 {
            return Err(SolverError::InvalidConfig("smoother sweeps must be at least 1".into()));
        }
        if !(self.weight > 0.0 && self.weight < 2.0) {
            return Err(SolverError::InvalidConfig(format!(
                "smoother weight {} outside (0, 2)",
                self.weight
            )));
        }
        if let Some(layout) = &self.block_layout {
            let total: usize = layout.iter().sum();
            if total != n || layout.iter().any(|&s| s == 0) {
                return Err(SolverError::InvalidConfig(format!(
                    "block layout sums to {total}, matrix dimension is {n}"
                )));
            }
        }
        if let Some(ranges) = &self.partition {
            check_partition(ranges, n)?;
        }
        Ok(())
    }
}

fn check_partition(ranges: &[(usize, usize)], n: usize) -> Result<()> {
    let mut next = 0;
    for &(s, e) in ranges {
        if s != next || e < s {
            return Err(SolverError::InvalidConfig(format!(
                "partition ranges must be contiguous and cover 0..{n}; got ({s}, {e}) after {next}"
            )));
        }
        next = e;
    }
    if next != n {
        return Err(SolverError::InvalidConfig(format!(
            "partition covers 0..{next}, matrix dimension is {n}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

fn checked_diagonal(a: &SparseMatrix, context: &'static str) -> Result<Vec<f64>> {
    let d = a.diagonal_values();
    if let Some(row) = d.iter().position(|&v| v == 0.0) {
        return Err(SolverError::ZeroDiagonal { context, row });
    }
    Ok(d)
}

/// One damped Jacobi sweep `x ← x + ω D⁻¹ (b − A x)`.
pub fn jacobi_sweep(a: &SparseMatrix, b: &[f64], x: &mut [f64], weight: f64) -> Result<()> {
    let d = checked_diagonal(a, "jacobi")?;
    let r = a.residual(b, x)?;
    for i in 0..x.len() {
        x[i] += weight * r[i] / d[i];
    }
    Ok(())
}

/// L1 diagonal `d_i = a_ii + Σ_{j outside the range of i} |a_ij|`.
///
/// `partition = None` means a single range (plain diagonal).
pub fn l1_diagonal(a: &SparseMatrix, partition: Option<&[(usize, usize)]>) -> Result<Vec<f64>> {
    let n = a.nrows();
    let single = [(0, n)];
    let ranges = partition.unwrap_or(&single);
    check_partition(ranges, n)?;
    let mut d = vec![0.0; n];
    for &(s, e) in ranges {
        for i in s..e {
            let (cols, vals) = a.row(i);
            let mut di = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                if j == i {
                    di += v;
                } else if j < s || j >= e {
                    di += v.abs();
                }
            }
            if di == 0.0 {
                return Err(SolverError::ZeroDiagonal { context: "l1 diagonal", row: i });
            }
            d[i] = di;
        }
    }
    Ok(d)
}

fn hybrid_gs_pass(
    a: &SparseMatrix,
    b: &[f64],
    x: &mut [f64],
    diag: &[f64],
    ranges: &[(usize, usize)],
    direction: Direction,
) {
    let x_old = (ranges.len() > 1).then(|| x.to_vec());
    for &(s, e) in ranges {
        let relax_row = |i: usize, x: &mut [f64]| {
            let (cols, vals) = a.row(i);
            let mut r = b[i];
            for (&j, &v) in cols.iter().zip(vals) {
                let xj = match &x_old {
                    Some(old) if j < s || j >= e => old[j],
                    _ => x[j],
                };
                r -= v * xj;
            }
            x[i] += r / diag[i];
        };
        match direction {
            Direction::Forward => (s..e).for_each(|i| relax_row(i, x)),
            Direction::Backward => (s..e).rev().for_each(|i| relax_row(i, x)),
        }
    }
}

/// One hybrid L1 Gauss–Seidel sweep: Gauss–Seidel inside each partition
/// range, Jacobi (old values) across ranges, L1 diagonal.
pub fn hybrid_l1_gs_sweep(
    a: &SparseMatrix,
    b: &[f64],
    x: &mut [f64],
    direction: Direction,
    partition: Option<&[(usize, usize)]>,
) -> Result<()> {
    let n = a.nrows();
    let diag = l1_diagonal(a, partition)?;
    let single = [(0, n)];
    hybrid_gs_pass(a, b, x, &diag, partition.unwrap_or(&single), direction);
    Ok(())
}

fn block_offsets(layout: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(layout.len() + 1);
    offsets.push(0);
    for s in layout {
        offsets.push(offsets.last().unwrap() + s);
    }
    offsets
}

fn factor_blocks(a: &SparseMatrix, offsets: &[usize]) -> Result<Vec<DenseLu>> {
    let mut lus = Vec::with_capacity(offsets.len() - 1);
    for (k, w) in offsets.windows(2).enumerate() {
        let (s, e) = (w[0], w[1]);
        let mut block = DenseMatrix::zeros(e - s, e - s);
        for i in s..e {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j >= s && j < e {
                    block[(i - s, j - s)] = v;
                }
            }
        }
        let lu = block
            .lu()
            .map_err(|source| SolverError::SingularBlock { block: k, source })?;
        lus.push(lu);
    }
    Ok(lus)
}

/// `z = blockdiag(A_k)⁻¹ r` with one dense LU per diagonal block.
pub fn block_jacobi_exact_apply(a: &SparseMatrix, layout: &[usize], r: &[f64]) -> Result<Vec<f64>> {
    let spec = SmootherSpec::new(SmootherKind::BlockJacobiExact).with_block_layout(layout.to_vec());
    let s = Smoother::build(a, &spec)?;
    let mut z = vec![0.0; r.len()];
    s.apply(a, r, &mut z);
    Ok(z)
}

#[derive(Debug, Clone)]
enum Kernel {
    Jacobi { inv_diag: Vec<f64>, weight: f64 },
    HybridGs { diag: Vec<f64>, ranges: Vec<(usize, usize)>, direction: Direction },
    Blocks { offsets: Vec<usize>, lus: Vec<DenseLu> },
    Dense(DenseLu),
    Amg(Box<AmgHierarchy>),
}

/// A smoother bound to one matrix.
///
/// The matrix itself is not stored; callers pass the same matrix the smoother
/// was built with.
#[derive(Debug, Clone)]
pub struct Smoother {
    n: usize,
    sweeps: usize,
    kernel: Kernel,
}

impl Smoother {
    pub fn build(a: &SparseMatrix, spec: &SmootherSpec) -> Result<Self> {
        if !a.is_square() {
            return Err(SolverError::InvalidConfig("smoother matrix must be square".into()));
        }
        let n = a.nrows();
        spec.validate(n)?;
        let kernel = match spec.kind {
            SmootherKind::Jacobi => Kernel::Jacobi {
                inv_diag: checked_diagonal(a, "jacobi")?.iter().map(|d| 1.0 / d).collect(),
                weight: spec.weight,
            },
            SmootherKind::L1Jacobi => {
                let ranges: Vec<(usize, usize)> = match &spec.partition {
                    Some(p) => p.clone(),
                    None => (0..n).map(|i| (i, i + 1)).collect(),
                };
                Kernel::Jacobi {
                    inv_diag: l1_diagonal(a, Some(&ranges))?.iter().map(|d| 1.0 / d).collect(),
                    weight: spec.weight,
                }
            }
            SmootherKind::HybridL1GsForward | SmootherKind::HybridL1GsBackward => {
                let ranges = spec.partition.clone().unwrap_or_else(|| vec![(0, n)]);
                Kernel::HybridGs {
                    diag: l1_diagonal(a, Some(&ranges))?,
                    ranges,
                    direction: if spec.kind == SmootherKind::HybridL1GsForward {
                        Direction::Forward
                    } else {
                        Direction::Backward
                    },
                }
            }
            SmootherKind::BlockJacobiExact => {
                let layout = spec.block_layout.clone().unwrap_or_else(|| vec![1; n]);
                let offsets = block_offsets(&layout);
                let lus = factor_blocks(a, &offsets)?;
                Kernel::Blocks { offsets, lus }
            }
            SmootherKind::DenseLu => Kernel::Dense(a.to_dense().lu()?),
            SmootherKind::AmgVcycle => {
                let cfg = spec.amg.as_deref().cloned().unwrap_or_default();
                Kernel::Amg(Box::new(AmgHierarchy::setup(a, &cfg)?))
            }
        };
        Ok(Self {
            n,
            sweeps: spec.sweeps,
            kernel,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Setup statistics when the smoother is an AMG V-cycle.
    pub fn amg_report(&self) -> Option<&crate::amg::AmgSetupReport> {
        match &self.kernel {
            Kernel::Amg(h) => Some(h.report()),
            _ => None,
        }
    }

    /// True when one application solves the system exactly.
    pub fn is_exact(&self) -> bool {
        matches!(self.kernel, Kernel::Dense(_))
    }

    /// Applies `sweeps` stationary iterations to `A x = b`, updating `x`.
    pub fn sweep(&self, a: &SparseMatrix, b: &[f64], x: &mut [f64]) {
        for _ in 0..self.sweeps {
            self.single_sweep(a, b, x);
        }
    }

    /// `z = M⁻¹ r`: the sweeps applied from a zero initial guess.
    pub fn apply(&self, a: &SparseMatrix, r: &[f64], z: &mut [f64]) {
        z.iter_mut().for_each(|v| *v = 0.0);
        match &self.kernel {
            // Direct kernels need no residual on the first sweep.
            Kernel::Dense(lu) => {
                z.copy_from_slice(r);
                lu.solve_in_place(z);
                for _ in 1..self.sweeps {
                    self.single_sweep(a, r, z);
                }
            }
            _ => self.sweep(a, r, z),
        }
    }

    fn single_sweep(&self, a: &SparseMatrix, b: &[f64], x: &mut [f64]) {
        match &self.kernel {
            Kernel::Jacobi { inv_diag, weight } => {
                let mut ax = vec![0.0; self.n];
                a.spmv_into(x, &mut ax);
                for i in 0..self.n {
                    x[i] += weight * (b[i] - ax[i]) * inv_diag[i];
                }
            }
            Kernel::HybridGs {
                diag,
                ranges,
                direction,
            } => hybrid_gs_pass(a, b, x, diag, ranges, *direction),
            Kernel::Blocks { offsets, lus } => {
                let mut r = vec![0.0; self.n];
                a.spmv_into(x, &mut r);
                for (ri, bi) in r.iter_mut().zip(b) {
                    *ri = bi - *ri;
                }
                for (w, lu) in offsets.windows(2).zip(lus) {
                    lu.solve_in_place(&mut r[w[0]..w[1]]);
                }
                for (xi, ri) in x.iter_mut().zip(&r) {
                    *xi += ri;
                }
            }
            Kernel::Dense(lu) => {
                let mut r = vec![0.0; self.n];
                a.spmv_into(x, &mut r);
                for (ri, bi) in r.iter_mut().zip(b) {
                    *ri = bi - *ri;
                }
                lu.solve_in_place(&mut r);
                for (xi, ri) in x.iter_mut().zip(&r) {
                    *xi += ri;
                }
            }
            Kernel::Amg(h) => {
                let mut r = vec![0.0; self.n];
                a.spmv_into(x, &mut r);
                for (ri, bi) in r.iter_mut().zip(b) {
                    *ri = bi - *ri;
                }
                let e = h.vcycle(&r);
                for (xi, ei) in x.iter_mut().zip(&e) {
                    *xi += ei;
                }
            }
        }
    }
}

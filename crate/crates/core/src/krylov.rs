//! Right-preconditioned restarted GMRES.
//!
//! Solves `A M⁻¹ y = b`, `x = M⁻¹ y`, so the Arnoldi residual is the true
//! (unpreconditioned) residual up to rounding. Convergence is only declared
//! after the true residual `‖b − A x‖ / ‖b‖` has been recomputed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::{dot, norm2, SparseMatrix};

/// A fixed linear map `y = Op x`.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// Overwrites `y` with `Op x`.
    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        self.apply(x, &mut y);
        y
    }
}

impl LinearOperator for SparseMatrix {
    fn nrows(&self) -> usize {
        SparseMatrix::nrows(self)
    }
    fn ncols(&self) -> usize {
        SparseMatrix::ncols(self)
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.spmv_into(x, y)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn nrows(&self) -> usize {
        (**self).nrows()
    }
    fn ncols(&self) -> usize {
        (**self).ncols()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
}

/// The identity map on `R^n`.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn nrows(&self) -> usize {
        self.0
    }
    fn ncols(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x)
    }
}

/// Wraps a closure as a square operator.
pub struct FnOperator<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn nrows(&self) -> usize {
        self.n
    }
    fn ncols(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct KrylovConfig {
    /// Krylov subspace dimension between restarts.
    pub restart: usize,
    /// Cap on the total number of inner iterations.
    pub max_iters: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self {
            restart: 50,
            max_iters: 500,
            rel_tol: 1e-7,
            abs_tol: 0.0,
        }
    }
}

impl KrylovConfig {
    pub fn with_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), KrylovError> {
        if self.restart == 0 {
            return Err(KrylovError::InvalidConfig("restart must be at least 1".into()));
        }
        if !(self.rel_tol >= 0.0) || !(self.abs_tol >= 0.0) {
            return Err(KrylovError::InvalidConfig("tolerances must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    /// Total number of inner (Arnoldi) steps.
    pub iterations: usize,
    /// Relative residuals: true values at each restart boundary and at exit,
    /// Arnoldi estimates after every inner step.
    pub residual_history: Vec<f64>,
    /// True relative residual `‖b − A x‖ / ‖b‖` of the returned iterate.
    pub final_residual: f64,
}

#[derive(Debug, Error)]
pub enum KrylovError {
    #[error("invalid GMRES configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("Arnoldi breakdown at iteration {iteration} with relative residual {residual:e}")]
    Breakdown { iteration: usize, residual: f64 },
    #[error("non-finite value encountered at iteration {iteration}")]
    NotFinite { iteration: usize },
}

const BREAKDOWN_TOL: f64 = 1e-300;

fn true_residual<A: LinearOperator + ?Sized>(a: &A, b: &[f64], x: &[f64], r: &mut [f64]) -> f64 {
    a.apply(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    norm2(r)
}

/// Right-preconditioned restarted GMRES with modified Gram–Schmidt.
///
/// `precond` applies `M⁻¹`. `x0 = None` starts from zero.
pub fn gmres<A, M>(
    a: &A,
    b: &[f64],
    precond: &M,
    cfg: &KrylovConfig,
    x0: Option<&[f64]>,
) -> Result<(Vec<f64>, SolveReport), KrylovError>
where
    A: LinearOperator + ?Sized,
    M: LinearOperator + ?Sized,
{
    cfg.validate()?;
    let n = b.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(KrylovError::Dimension(format!(
            "operator is {}x{}, rhs has length {n}",
            a.nrows(),
            a.ncols()
        )));
    }
    if precond.nrows() != n || precond.ncols() != n {
        return Err(KrylovError::Dimension(format!(
            "preconditioner is {}x{}, expected {n}x{n}",
            precond.nrows(),
            precond.ncols()
        )));
    }
    let mut x = match x0 {
        Some(x0) if x0.len() != n => {
            return Err(KrylovError::Dimension("initial guess length".into()));
        }
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };

    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveReport {
                converged: true,
                iterations: 0,
                residual_history: vec![0.0],
                final_residual: 0.0,
            },
        ));
    }
    let target = (cfg.rel_tol * bnorm).max(cfg.abs_tol);

    let m = cfg.restart;
    let mut r = vec![0.0; n];
    let mut beta = true_residual(a, b, &x, &mut r);
    let mut history = vec![beta / bnorm];
    let mut iterations = 0usize;

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut hess = vec![vec![0.0; m]; m + 1];
    let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
    let mut g = vec![0.0; m + 1];
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];

    loop {
        if !beta.is_finite() {
            return Err(KrylovError::NotFinite { iteration: iterations });
        }
        if beta <= target {
            return Ok((
                x,
                SolveReport {
                    converged: true,
                    iterations,
                    residual_history: history,
                    final_residual: beta / bnorm,
                },
            ));
        }
        if iterations >= cfg.max_iters {
            return Ok((
                x,
                SolveReport {
                    converged: false,
                    iterations,
                    residual_history: history,
                    final_residual: beta / bnorm,
                },
            ));
        }

        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        let mut steps = 0;
        let mut breakdown = false;

        for j in 0..m {
            if iterations >= cfg.max_iters {
                break;
            }
            precond.apply(&basis[j], &mut z);
            a.apply(&z, &mut w);

            let norm_before = norm2(&w);
            for i in 0..=j {
                let h = dot(&w, &basis[i]);
                hess[i][j] = h;
                for (wk, vk) in w.iter_mut().zip(&basis[i]) {
                    *wk -= h * vk;
                }
            }
            let mut hnext = norm2(&w);
            if hnext < norm_before / std::f64::consts::SQRT_2 {
                for i in 0..=j {
                    let h = dot(&w, &basis[i]);
                    hess[i][j] += h;
                    for (wk, vk) in w.iter_mut().zip(&basis[i]) {
                        *wk -= h * vk;
                    }
                }
                hnext = norm2(&w);
            }
            hess[j + 1][j] = hnext;

            for i in 0..j {
                let (hi, hi1) = (hess[i][j], hess[i + 1][j]);
                hess[i][j] = cs[i] * hi + sn[i] * hi1;
                hess[i + 1][j] = -sn[i] * hi + cs[i] * hi1;
            }
            let (hjj, hj1) = (hess[j][j], hess[j + 1][j]);
            let rho = hjj.hypot(hj1);
            if rho == 0.0 {
                cs[j] = 1.0;
                sn[j] = 0.0;
            } else {
                cs[j] = hjj / rho;
                sn[j] = hj1 / rho;
            }
            hess[j][j] = rho;
            hess[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];

            iterations += 1;
            steps = j + 1;
            let estimate = g[j + 1].abs();
            if !estimate.is_finite() || !rho.is_finite() {
                return Err(KrylovError::NotFinite { iteration: iterations });
            }
            history.push(estimate / bnorm);

            if hnext < BREAKDOWN_TOL {
                breakdown = true;
                break;
            }
            if estimate <= target {
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }

        if steps > 0 {
            // Back substitution for the least-squares coefficients.
            let mut y = vec![0.0; steps];
            for i in (0..steps).rev() {
                let mut s = g[i];
                for k in (i + 1)..steps {
                    s -= hess[i][k] * y[k];
                }
                y[i] = if hess[i][i] != 0.0 { s / hess[i][i] } else { 0.0 };
            }
            let mut update = vec![0.0; n];
            for (yi, vi) in y.iter().zip(&basis) {
                for (u, v) in update.iter_mut().zip(vi) {
                    *u += yi * v;
                }
            }
            precond.apply(&update, &mut z);
            for (xi, zi) in x.iter_mut().zip(&z) {
                *xi += zi;
            }
        }

        beta = true_residual(a, b, &x, &mut r);
        history.push(beta / bnorm);
        if breakdown && beta > target && beta.is_finite() {
            return Err(KrylovError::Breakdown {
                iteration: iterations,
                residual: beta / bnorm,
            });
        }
    }
}

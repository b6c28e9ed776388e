//! Classical algebraic multigrid: strength of connection, Ruge–Stüben or PMIS
//! coarsening, direct interpolation, Galerkin coarse operators and a V(1,1) cycle.
//!
//! With an unknown map (one unknown id per dof) strength, coarsening and
//! interpolation only see couplings between dofs of the same unknown, while
//! the Galerkin product uses the full operator.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::krylov::LinearOperator;
use crate::relax::{Smoother, SmootherKind, SmootherSpec};
use crate::sparse::{matmul, DenseLu, IndexSet, SparseMatrix};

/// Coarsest grids larger than this are smoothed instead of factored densely.
const MAX_DENSE_COARSE: usize = 3000;
const COARSE_SMOOTHING_SWEEPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Coarsening {
    /// Parallel modified independent set with hashed tie-breaking.
    Pmis,
    /// Classical one-pass Ruge–Stüben (first pass only).
    #[default]
    RugeStuben,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    ClassicalDirect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmgConfig {
    pub strength_theta: f64,
    pub max_levels: usize,
    /// Levels at or below this size are solved directly.
    pub coarse_size: usize,
    pub coarsening: Coarsening,
    pub interpolation: Interpolation,
    pub pre_smoother: SmootherSpec,
    pub post_smoother: SmootherSpec,
    /// Explicit unknown id per dof.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unknown_map: Option<Vec<usize>>,
    /// Asks the caller (MGR setup, CLI) to fill `unknown_map` from the
    /// problem's dof labels.
    pub unknown_based: bool,
}

impl Default for AmgConfig {
    fn default() -> Self {
        Self {
            strength_theta: 0.25,
            max_levels: 25,
            coarse_size: 50,
            coarsening: Coarsening::RugeStuben,
            interpolation: Interpolation::ClassicalDirect,
            pre_smoother: SmootherSpec::new(SmootherKind::HybridL1GsForward),
            post_smoother: SmootherSpec::new(SmootherKind::HybridL1GsBackward),
            unknown_map: None,
            unknown_based: false,
        }
    }
}

impl AmgConfig {
    pub fn with_unknown_map(mut self, map: Vec<usize>) -> Self {
        self.unknown_map = Some(map);
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.strength_theta > 0.0 && self.strength_theta < 1.0) {
            return Err(SolverError::InvalidConfig(format!(
                "strength_theta {} outside (0, 1)",
                self.strength_theta
            )));
        }
        if self.coarse_size == 0 || self.max_levels == 0 {
            return Err(SolverError::InvalidConfig("coarse_size and max_levels must be positive".into()));
        }
        if let Some(map) = &self.unknown_map {
            if map.len() != n {
                return Err(SolverError::InvalidConfig(format!(
                    "unknown map has length {}, matrix dimension is {n}",
                    map.len()
                )));
            }
        }
        for s in [&self.pre_smoother, &self.post_smoother] {
            if matches!(s.kind, SmootherKind::AmgVcycle | SmootherKind::DenseLu) {
                return Err(SolverError::InvalidConfig("AMG smoothers must be stationary sweeps".into()));
            }
        }
        Ok(())
    }
}

fn same_unknown(map: Option<&[usize]>, i: usize, j: usize) -> bool {
    map.map_or(true, |m| m[i] == m[j])
}

/// Strong dependencies of every row, returned as a 0/1 pattern matrix.
///
/// `j` is strong for `i` when `−s a_ij ≥ θ max_{k≠i} (−s a_ik)` with `s` the
/// sign of `a_ii`; rows without such opposite-sign couplings use `|a_ij|`.
pub fn strength_graph(a: &SparseMatrix, theta: f64, unknown_map: Option<&[usize]>) -> SparseMatrix {
    let n = a.nrows();
    let mut offsets = vec![0usize; n + 1];
    let mut cols = Vec::new();
    for i in 0..n {
        let (rc, rv) = a.row(i);
        let sign = if a.get(i, i) < 0.0 { -1.0 } else { 1.0 };
        let couples = |j: usize, v: f64| j != i && v != 0.0 && same_unknown(unknown_map, i, j);
        let max_neg = rc
            .iter()
            .zip(rv)
            .filter(|(&j, &v)| couples(j, v))
            .map(|(_, &v)| -sign * v)
            .fold(0.0f64, f64::max);
        if max_neg > 0.0 {
            for (&j, &v) in rc.iter().zip(rv) {
                if couples(j, v) && -sign * v >= theta * max_neg {
                    cols.push(j);
                }
            }
        } else {
            let max_abs = rc
                .iter()
                .zip(rv)
                .filter(|(&j, &v)| couples(j, v))
                .map(|(_, &v)| v.abs())
                .fold(0.0f64, f64::max);
            if max_abs > 0.0 {
                for (&j, &v) in rc.iter().zip(rv) {
                    if couples(j, v) && v.abs() >= theta * max_abs {
                        cols.push(j);
                    }
                }
            }
        }
        offsets[i + 1] = cols.len();
    }
    let nnz = cols.len();
    SparseMatrix::new(n, n, offsets, cols, vec![1.0; nnz]).expect("strength pattern is valid CSR")
}

/// Deterministic pseudo-random value in `[0, 1)` for a point index.
fn tie_break(i: usize) -> f64 {
    let mut z = (i as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Mark {
    Undecided,
    Coarse,
    Fine,
}

/// PMIS splitting of the strength graph `s` (strong dependencies per row).
///
/// The graph is symmetrized by union. Points without any strong coupling
/// become C-points.
pub fn pmis_coarsen(s: &SparseMatrix) -> (IndexSet, IndexSet) {
    let n = s.nrows();
    let st = s.transpose();
    let sym = s.add_scaled(1.0, &st).expect("square strength graph");
    let weight: Vec<f64> = (0..n).map(|i| st.row(i).0.len() as f64 + tie_break(i)).collect();
    let beats = |i: usize, j: usize| weight[i] > weight[j] || (weight[i] == weight[j] && i < j);

    let mut mark = vec![Mark::Undecided; n];
    for i in 0..n {
        if sym.row(i).0.iter().all(|&j| j == i) {
            mark[i] = Mark::Coarse;
        }
    }
    let mut undecided: Vec<usize> = (0..n).filter(|&i| mark[i] == Mark::Undecided).collect();
    while !undecided.is_empty() {
        let chosen: Vec<usize> = undecided
            .iter()
            .copied()
            .filter(|&i| {
                sym.row(i)
                    .0
                    .iter()
                    .all(|&j| j == i || mark[j] != Mark::Undecided || beats(i, j))
            })
            .collect();
        for &c in &chosen {
            mark[c] = Mark::Coarse;
        }
        for &c in &chosen {
            // Points that strongly depend on a new C-point become F.
            for &j in st.row(c).0 {
                if mark[j] == Mark::Undecided {
                    mark[j] = Mark::Fine;
                }
            }
        }
        undecided.retain(|&i| mark[i] == Mark::Undecided);
    }
    let coarse = IndexSet::from_mask(&mark.iter().map(|&m| m == Mark::Coarse).collect::<Vec<_>>());
    let fine = coarse.complement(n);
    (coarse, fine)
}

/// One-pass Ruge–Stüben splitting: repeatedly pick the undecided point with
/// the most undecided/F dependents (lowest index on ties) as C, make its
/// dependents F and raise the weight of points those new F-points depend on.
/// Points without any strong coupling become C-points.
pub fn rs_coarsen(s: &SparseMatrix) -> (IndexSet, IndexSet) {
    use std::cmp::Reverse;
    use std::collections::BTreeSet;

    let n = s.nrows();
    let st = s.transpose();
    let mut mark = vec![Mark::Undecided; n];
    let mut lambda: Vec<usize> = (0..n).map(|i| st.row(i).0.len()).collect();
    let mut queue = BTreeSet::new();
    for i in 0..n {
        if s.row(i).0.is_empty() && st.row(i).0.is_empty() {
            mark[i] = Mark::Coarse;
        } else {
            queue.insert((lambda[i], Reverse(i)));
        }
    }
    while let Some((_, Reverse(c))) = queue.pop_last() {
        mark[c] = Mark::Coarse;
        for &j in st.row(c).0 {
            if mark[j] != Mark::Undecided {
                continue;
            }
            queue.remove(&(lambda[j], Reverse(j)));
            mark[j] = Mark::Fine;
            for &k in s.row(j).0 {
                if mark[k] == Mark::Undecided {
                    queue.remove(&(lambda[k], Reverse(k)));
                    lambda[k] += 1;
                    queue.insert((lambda[k], Reverse(k)));
                }
            }
        }
        for &k in s.row(c).0 {
            if mark[k] == Mark::Undecided && lambda[k] > 0 {
                queue.remove(&(lambda[k], Reverse(k)));
                lambda[k] -= 1;
                queue.insert((lambda[k], Reverse(k)));
            }
        }
    }
    let coarse = IndexSet::from_mask(&mark.iter().map(|&m| m == Mark::Coarse).collect::<Vec<_>>());
    let fine = coarse.complement(n);
    (coarse, fine)
}

/// Direct interpolation weights; returns `(P, number of fallback rows)`.
///
/// F-point `i` interpolates from its strong C-dependencies `P_i`. Couplings of
/// the diagonal's opposite sign are scaled by `Σ_{k≠i} a_ik / Σ_{k∈P_i} a_ik`
/// over that sign class, same-sign couplings likewise (or lumped into the
/// diagonal when no same-sign C-point exists). An F-point without strong
/// C-dependencies interpolates from every C-neighbour with `−a_ij/a_ii`.
pub fn classical_interp(
    a: &SparseMatrix,
    strength: &SparseMatrix,
    coarse: &IndexSet,
    unknown_map: Option<&[usize]>,
) -> Result<(SparseMatrix, usize)> {
    let n = a.nrows();
    let mut coarse_index = vec![usize::MAX; n];
    for (k, &c) in coarse.as_slice().iter().enumerate() {
        coarse_index[c] = k;
    }
    let nc = coarse.len();
    let mut trip = Vec::new();
    let mut fallbacks = 0;
    for i in 0..n {
        if coarse_index[i] != usize::MAX {
            trip.push((i, coarse_index[i], 1.0));
            continue;
        }
        let aii = a.get(i, i);
        if aii == 0.0 {
            return Err(SolverError::ZeroDiagonal {
                context: "amg interpolation",
                row: i,
            });
        }
        let sign = aii.signum();
        let strong = strength.row(i).0;
        let (rc, rv) = a.row(i);
        let (mut sum_opp, mut sum_same, mut c_opp, mut c_same) = (0.0, 0.0, 0.0, 0.0);
        let mut interp_from = Vec::new();
        for (&j, &v) in rc.iter().zip(rv) {
            if j == i || !same_unknown(unknown_map, i, j) {
                continue;
            }
            let in_p = coarse_index[j] != usize::MAX && strong.binary_search(&j).is_ok();
            if sign * v < 0.0 {
                sum_opp += v;
                if in_p {
                    c_opp += v;
                }
            } else {
                sum_same += v;
                if in_p {
                    c_same += v;
                }
            }
            if in_p {
                interp_from.push((j, v));
            }
        }
        if interp_from.is_empty() {
            fallbacks += 1;
            for (&j, &v) in rc.iter().zip(rv) {
                if j != i && coarse_index[j] != usize::MAX && same_unknown(unknown_map, i, j) {
                    trip.push((i, coarse_index[j], -v / aii));
                }
            }
            continue;
        }
        if c_opp == 0.0 {
            // Only same-sign strong C-points: fall back to the one-class formula.
            let total = sum_opp + sum_same;
            let ctotal = c_same;
            let scale = if ctotal != 0.0 { total / ctotal } else { 0.0 };
            for (j, v) in interp_from {
                trip.push((i, coarse_index[j], -scale * v / aii));
            }
            continue;
        }
        let alpha = sum_opp / c_opp;
        let (beta, diag) = if c_same != 0.0 {
            (sum_same / c_same, aii)
        } else {
            (0.0, aii + sum_same)
        };
        if diag == 0.0 {
            return Err(SolverError::ZeroDiagonal {
                context: "amg interpolation (lumped)",
                row: i,
            });
        }
        for (j, v) in interp_from {
            let w = if sign * v < 0.0 { -alpha * v / diag } else { -beta * v / diag };
            trip.push((i, coarse_index[j], w));
        }
    }
    Ok((SparseMatrix::from_triplets(n, nc, &trip)?, fallbacks))
}

#[derive(Debug, Clone)]
pub struct AmgLevel {
    pub a: SparseMatrix,
    pub p: SparseMatrix,
    pub r: SparseMatrix,
    pre: Smoother,
    post: Smoother,
}

#[derive(Debug, Clone)]
enum CoarseSolver {
    Dense(DenseLu),
    Smooth(Smoother),
}

/// Setup statistics.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AmgSetupReport {
    pub level_sizes: Vec<usize>,
    pub level_nnz: Vec<usize>,
    /// F-points that had no strong C-dependency, per level.
    pub interp_fallbacks: Vec<usize>,
    /// Why coarsening stopped.
    pub stop_reason: String,
}

impl AmgSetupReport {
    pub fn operator_complexity(&self) -> f64 {
        let total: usize = self.level_nnz.iter().sum();
        total as f64 / self.level_nnz.first().copied().unwrap_or(1).max(1) as f64
    }

    pub fn grid_complexity(&self) -> f64 {
        let total: usize = self.level_sizes.iter().sum();
        total as f64 / self.level_sizes.first().copied().unwrap_or(1).max(1) as f64
    }
}

#[derive(Debug, Clone)]
pub struct AmgHierarchy {
    levels: Vec<AmgLevel>,
    coarse_a: SparseMatrix,
    coarse: CoarseSolver,
    report: AmgSetupReport,
}

impl AmgHierarchy {
    pub fn setup(a: &SparseMatrix, cfg: &AmgConfig) -> Result<Self> {
        if !a.is_square() {
            return Err(SolverError::InvalidConfig("AMG matrix must be square".into()));
        }
        cfg.validate(a.nrows())?;
        let mut report = AmgSetupReport::default();
        let mut levels = Vec::new();
        let mut current = a.clone();
        let mut map = cfg.unknown_map.clone();
        loop {
            let n = current.nrows();
            report.level_sizes.push(n);
            report.level_nnz.push(current.nnz());
            if n <= cfg.coarse_size {
                report.stop_reason = format!("coarse size reached ({n} <= {})", cfg.coarse_size);
                break;
            }
            if levels.len() + 1 >= cfg.max_levels {
                report.stop_reason = format!("max levels reached ({})", cfg.max_levels);
                break;
            }
            let s = strength_graph(&current, cfg.strength_theta, map.as_deref());
            let (coarse, _) = match cfg.coarsening {
                Coarsening::Pmis => pmis_coarsen(&s),
                Coarsening::RugeStuben => rs_coarsen(&s),
            };
            if coarse.len() == n || coarse.is_empty() {
                report.stop_reason = format!("coarsening stalled at {n} dofs");
                break;
            }
            let (p, fallbacks) = classical_interp(&current, &s, &coarse, map.as_deref())?;
            report.interp_fallbacks.push(fallbacks);
            let r = p.transpose();
            let next = matmul(&r, &matmul(&current, &p)?)?;
            let pre = Smoother::build(&current, &cfg.pre_smoother)?;
            let post = Smoother::build(&current, &cfg.post_smoother)?;
            map = map.map(|m| coarse.as_slice().iter().map(|&c| m[c]).collect());
            levels.push(AmgLevel {
                a: std::mem::replace(&mut current, next),
                p,
                r,
                pre,
                post,
            });
        }
        let coarse = if current.nrows() <= MAX_DENSE_COARSE {
            CoarseSolver::Dense(current.to_dense().lu()?)
        } else {
            let spec = SmootherSpec::new(SmootherKind::HybridL1GsForward).with_sweeps(COARSE_SMOOTHING_SWEEPS);
            CoarseSolver::Smooth(Smoother::build(&current, &spec)?)
        };
        Ok(Self {
            levels,
            coarse_a: current,
            coarse,
            report,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len() + 1
    }

    pub fn levels(&self) -> &[AmgLevel] {
        &self.levels
    }

    pub fn coarsest_operator(&self) -> &SparseMatrix {
        &self.coarse_a
    }

    pub fn report(&self) -> &AmgSetupReport {
        &self.report
    }

    pub fn dim(&self) -> usize {
        self.levels.first().map_or(self.coarse_a.nrows(), |l| l.a.nrows())
    }

    /// Operator on level `l` (the coarsest when `l == levels().len()`).
    pub fn operator(&self, l: usize) -> &SparseMatrix {
        self.levels.get(l).map_or(&self.coarse_a, |lv| &lv.a)
    }

    /// One V(1,1) cycle from a zero initial guess.
    pub fn vcycle(&self, r: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; r.len()];
        self.cycle(0, r, &mut z);
        z
    }

    fn cycle(&self, l: usize, b: &[f64], x: &mut [f64]) {
        let Some(level) = self.levels.get(l) else {
            match &self.coarse {
                CoarseSolver::Dense(lu) => {
                    x.copy_from_slice(b);
                    lu.solve_in_place(x);
                }
                CoarseSolver::Smooth(s) => s.apply(&self.coarse_a, b, x),
            }
            return;
        };
        level.pre.apply(&level.a, b, x);
        let res = level.a.residual(b, x).expect("level dimensions");
        let rc = level.r.spmv(&res).expect("restriction dimensions");
        let mut ec = vec![0.0; rc.len()];
        self.cycle(l + 1, &rc, &mut ec);
        let corr = level.p.spmv(&ec).expect("interpolation dimensions");
        for (xi, ci) in x.iter_mut().zip(&corr) {
            *xi += ci;
        }
        level.post.sweep(&level.a, b, x);
    }
}

impl LinearOperator for AmgHierarchy {
    fn nrows(&self) -> usize {
        self.dim()
    }
    fn ncols(&self) -> usize {
        self.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        self.cycle(0, x, y);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::{gmres, Identity, KrylovConfig};
    use proptest::prelude::*;

    pub(crate) fn laplace_1d(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    pub(crate) fn laplace_2d(m: usize, eps: f64) -> SparseMatrix {
        let idx = |i: usize, j: usize| i * m + j;
        let mut t = Vec::new();
        for i in 0..m {
            for j in 0..m {
                let k = idx(i, j);
                t.push((k, k, 2.0 + 2.0 * eps));
                if j > 0 {
                    t.push((k, idx(i, j - 1), -1.0));
                }
                if j + 1 < m {
                    t.push((k, idx(i, j + 1), -1.0));
                }
                if i > 0 {
                    t.push((k, idx(i - 1, j), -eps));
                }
                if i + 1 < m {
                    t.push((k, idx(i + 1, j), -eps));
                }
            }
        }
        SparseMatrix::from_triplets(m * m, m * m, &t).unwrap()
    }

    #[test]
    fn strength_examples() {
        let a = laplace_1d(6);
        let s = strength_graph(&a, 0.25, None);
        assert_eq!(s.nnz(), a.nnz() - 6);

        let d = SparseMatrix::diagonal(&[1.0, 2.0, 3.0]);
        assert_eq!(strength_graph(&d, 0.25, None).nnz(), 0);

        let m = 5;
        let a = laplace_2d(m, 0.01);
        let s = strength_graph(&a, 0.25, None);
        for i in 0..m * m {
            for &j in s.row(i).0 {
                assert_eq!(i / m, j / m, "strong coupling {i}->{j} crosses the weak direction");
            }
        }
        assert_eq!(s.nnz(), 2 * m * (m - 1));
    }

    #[test]
    fn strength_respects_unknown_map() {
        let a = laplace_1d(4);
        let s = strength_graph(&a, 0.25, Some(&[0, 1, 0, 1]));
        assert_eq!(s.nnz(), 0);
    }

    #[test]
    fn pmis_examples() {
        let (c, f) = pmis_coarsen(&strength_graph(&SparseMatrix::identity(4), 0.25, None));
        assert_eq!(c.len(), 4);
        assert!(f.is_empty());

        let (c, f) = pmis_coarsen(&strength_graph(&laplace_1d(2), 0.25, None));
        assert_eq!((c.len(), f.len()), (1, 1));

        let s = strength_graph(&laplace_1d(9), 0.25, None);
        let (c, f) = pmis_coarsen(&s);
        assert!((3..=5).contains(&c.len()), "|C| = {}", c.len());
        assert_eq!(c.len() + f.len(), 9);
        for &i in c.as_slice() {
            for &j in s.row(i).0 {
                assert!(!c.contains(j), "adjacent C-points {i}, {j}");
            }
        }
    }

    #[test]
    fn interpolation_examples() {
        let a = laplace_1d(3);
        let s = strength_graph(&a, 0.25, None);
        let all = IndexSet::range(0, 3);
        let (p, _) = classical_interp(&a, &s, &all, None).unwrap();
        assert_eq!(p, SparseMatrix::identity(3));

        let c = IndexSet::new(vec![0, 2], 3).unwrap();
        let (p, fb) = classical_interp(&a, &s, &c, None).unwrap();
        assert_eq!(fb, 0);
        assert_eq!(p.row(1), (&[0usize, 1][..], &[0.5, 0.5][..]));
    }

    #[test]
    fn identity_is_a_single_level() {
        let h = AmgHierarchy::setup(&SparseMatrix::identity(80), &AmgConfig::default()).unwrap();
        assert_eq!(h.num_levels(), 1);
        let r: Vec<f64> = (0..80).map(|i| i as f64).collect();
        assert_eq!(h.vcycle(&r), r);
    }

    fn poisson_iterations_with(m: usize, cfg: &AmgConfig) -> usize {
        let a = laplace_2d(m, 1.0);
        let h = AmgHierarchy::setup(&a, cfg).unwrap();
        let b = vec![1.0; m * m];
        let (_, rep) = gmres(&a, &b, &h, &KrylovConfig::with_tol(1e-8), None).unwrap();
        assert!(rep.converged);
        rep.iterations
    }

    fn poisson_iterations(m: usize) -> usize {
        poisson_iterations_with(m, &AmgConfig::default())
    }

    #[test]
    fn pmis_option_still_converges() {
        let cfg = AmgConfig {
            coarsening: Coarsening::Pmis,
            ..AmgConfig::default()
        };
        assert!(poisson_iterations_with(32, &cfg) <= 20);
    }

    #[test]
    fn rs_examples() {
        let (c, f) = rs_coarsen(&strength_graph(&SparseMatrix::identity(4), 0.25, None));
        assert_eq!((c.len(), f.len()), (4, 0));
        let (c, f) = rs_coarsen(&strength_graph(&laplace_1d(2), 0.25, None));
        assert_eq!((c.len(), f.len()), (1, 1));
        let (c, _) = rs_coarsen(&strength_graph(&laplace_1d(9), 0.25, None));
        assert_eq!(c.as_slice(), &[1, 3, 5, 7]);
    }

    #[test]
    fn poisson_32_converges_quickly() {
        let its = poisson_iterations(32);
        assert!(its <= 20, "{its} iterations");
    }

    #[test]
    fn poisson_iterations_are_mesh_independent() {
        let its: Vec<usize> = [16, 32, 64].iter().map(|&m| poisson_iterations(m)).collect();
        let (lo, hi) = (*its.iter().min().unwrap(), *its.iter().max().unwrap());
        assert!(hi as f64 <= 1.5 * lo as f64, "iterations {its:?}");
    }

    #[test]
    fn galerkin_identity_holds_exactly() {
        let a = laplace_2d(20, 1.0);
        let h = AmgHierarchy::setup(&a, &AmgConfig::default()).unwrap();
        assert!(h.num_levels() > 2);
        for (l, level) in h.levels().iter().enumerate() {
            assert_eq!(level.r, level.p.transpose());
            let rap = matmul(&level.r, &matmul(&level.a, &level.p).unwrap()).unwrap();
            assert_eq!(&rap, h.operator(l + 1));
            assert!(h.operator(l + 1).nrows() < level.a.nrows());
        }
    }

    #[test]
    fn vcycle_beats_plain_gmres() {
        let a = laplace_2d(24, 1.0);
        let b = vec![1.0; 576];
        let cfg = KrylovConfig::with_tol(1e-8);
        let h = AmgHierarchy::setup(&a, &AmgConfig::default()).unwrap();
        let (_, with) = gmres(&a, &b, &h, &cfg, None).unwrap();
        let (_, without) = gmres(&a, &b, &Identity(576), &cfg, None).unwrap();
        assert!(with.iterations * 3 < without.iterations);
    }

    #[test]
    fn unknown_based_block_diagonal_matches_scalar() {
        // Interleave two independent scalar problems.
        let m = 12;
        let a1 = laplace_2d(m, 1.0);
        let a2 = laplace_2d(m, 0.5).scaled(3.0);
        let n = m * m;
        let mut t = Vec::new();
        for (i, j, v) in a1.triplets() {
            t.push((2 * i, 2 * j, v));
        }
        for (i, j, v) in a2.triplets() {
            t.push((2 * i + 1, 2 * j + 1, v));
        }
        let a = SparseMatrix::from_triplets(2 * n, 2 * n, &t).unwrap();
        let map: Vec<usize> = (0..2 * n).map(|i| i % 2).collect();
        let s = strength_graph(&a, 0.25, Some(&map));
        let (c, _) = rs_coarsen(&s);
        let (p, _) = classical_interp(&a, &s, &c, Some(&map)).unwrap();

        for (ak, off) in [(&a1, 0usize), (&a2, 1)] {
            let sk = strength_graph(ak, 0.25, None);
            let (ck, _) = rs_coarsen(&sk);
            let sub_c: Vec<usize> = c.as_slice().iter().filter(|&&i| i % 2 == off).map(|&i| i / 2).collect();
            assert_eq!(sub_c.as_slice(), ck.as_slice());
            let (pk, _) = classical_interp(ak, &sk, &ck, None).unwrap();
            let rows = IndexSet::new((0..n).map(|i| 2 * i + off).collect(), 2 * n).unwrap();
            let cols_global: Vec<usize> = c
                .as_slice()
                .iter()
                .enumerate()
                .filter(|(_, &g)| g % 2 == off)
                .map(|(k, _)| k)
                .collect();
            let cols = IndexSet::new(cols_global, c.len()).unwrap();
            assert_eq!(p.extract(&rows, &cols).unwrap(), pk);
            let other = IndexSet::new(
                c.as_slice().iter().enumerate().filter(|(_, &g)| g % 2 != off).map(|(k, _)| k).collect(),
                c.len(),
            )
            .unwrap();
            assert_eq!(p.extract(&rows, &other).unwrap().max_abs(), 0.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn vcycle_is_linear(
            r1 in prop::collection::vec(-1.0f64..1.0, 400),
            r2 in prop::collection::vec(-1.0f64..1.0, 400),
            alpha in -2.0f64..2.0,
            beta in -2.0f64..2.0,
        ) {
            let a = laplace_2d(20, 1.0);
            let h = AmgHierarchy::setup(&a, &AmgConfig::default()).unwrap();
            let comb: Vec<f64> = r1.iter().zip(&r2).map(|(x, y)| alpha * x + beta * y).collect();
            let (z1, z2, zc) = (h.vcycle(&r1), h.vcycle(&r2), h.vcycle(&comb));
            let scale = zc.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for i in 0..400 {
                prop_assert!((zc[i] - alpha * z1[i] - beta * z2[i]).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn zero_row_sum_interpolation_rows_sum_to_one(
            edges in prop::collection::vec((0usize..30, 0usize..30, 0.1f64..2.0), 30..120),
        ) {
            // Graph Laplacian plus a path to keep it connected: an M-matrix with zero row sums.
            let n = 30;
            let mut w = std::collections::BTreeMap::new();
            for i in 0..n - 1 {
                *w.entry((i, i + 1)).or_insert(0.0) += 1.0;
            }
            for (i, j, v) in edges {
                if i != j {
                    *w.entry((i.min(j), i.max(j))).or_insert(0.0) += v;
                }
            }
            let mut t = Vec::new();
            for (&(i, j), &v) in &w {
                t.extend([(i, j, -v), (j, i, -v), (i, i, v), (j, j, v)]);
            }
            let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
            let s = strength_graph(&a, 0.25, None);
            let (c, f) = pmis_coarsen(&s);
            let (p, _) = classical_interp(&a, &s, &c, None).unwrap();
            for &i in f.as_slice() {
                let sum: f64 = p.row(i).1.iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-12, "row {} sums to {}", i, sum);
            }
        }
    }
}

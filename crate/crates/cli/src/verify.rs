//! Oracle suite: one check per acceptance criterion plus a negative control
//! that breaks a transfer operator and expects the exactness check to notice.

use std::time::Instant;

use mgrkit_core::amg::{AmgConfig, AmgHierarchy};
use mgrkit_core::mgr::{
    split, CoarseSolverSpec, DofPartition, InterpKind, MgrHierarchy, MgrLevelSpec, MgrStrategy, RestrictKind,
};
use mgrkit_core::relax::SmootherSpec;
use mgrkit_core::sparse::matmul;
use mgrkit_core::{gmres, IndexSet, KrylovConfig, SolveReport, SparseMatrix};
use mgrkit_problems::comp::{self, CompConfig};
use mgrkit_problems::frac::{self, FracConfig};
use mgrkit_problems::mfd::{self, InnerProductKind, MfdConfig, SystemForm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;

/// Pinned acceptance thresholds.
pub mod tol {
    pub const EXACT_RESIDUAL: f64 = 1e-12;
    pub const EXACTNESS_TRIALS: usize = 50;
    pub const EXACTNESS_MAX_N: usize = 200;
    pub const EXACTNESS_SECONDS: f64 = 10.0;
    pub const SCHUR_SIZE: usize = 30;
    pub const SCHUR_TRIALS: usize = 20;
    pub const SCHUR_REL: f64 = 1e-12;
    pub const TPFA_REL: f64 = 1e-12;
    pub const CONDENSATION: f64 = 1e-10;
    pub const PATCH_FLUX: f64 = 1e-10;
    pub const PATCH_TPFA_MIN: f64 = 1e-6;
    pub const PATCH_DIMS: [usize; 3] = [6, 6, 6];
    pub const PATCH_PERTURBATION: f64 = 0.2;
    pub const MFD_TOL: f64 = 1e-7;
    pub const MFD_SIZES: [usize; 3] = [8, 16, 32];
    pub const MFD_MAX_TPFA: usize = 30;
    pub const MFD_MAX_CONSISTENT: usize = 40;
    pub const MFD_SECONDS: f64 = 180.0;
    pub const GROWTH: f64 = 1.5;
    pub const COMP_TOL: f64 = 1e-6;
    pub const COMP_SIZES: [usize; 3] = [8, 12, 16];
    pub const COMP_MAX: usize = 40;
    pub const COMP_LEVEL1_REL: f64 = 1e-12;
    pub const FRAC_ORDER_N: usize = 64;
    pub const FRAC_ORDER_TOL: f64 = 1e-4;
    pub const FRAC_MAX: usize = 60;
    pub const FRAC_SCHUR_REL: f64 = 1e-12;
    pub const FRAC_SIZES: [usize; 3] = [32, 64, 128];
    pub const FRAC_SCALING_TOL: f64 = 1e-6;
    pub const GRIFFITH_N: usize = 64;
    pub const GRIFFITH_REL: f64 = 0.25;
    pub const GRIFFITH_PRESSURE: f64 = 1e6;
    pub const AMG_SIZES: [usize; 3] = [16, 32, 64];
    pub const AMG_TOL: f64 = 1e-8;
    pub const AMG_MAX: usize = 20;
    pub const VERIFY_SECONDS: f64 = 600.0;
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub id: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{status}] {:<10} {:<28} {} ({:.1}s)", self.id, self.name, self.detail, self.seconds)
    }
}

pub struct Check {
    pub id: &'static str,
    pub name: &'static str,
    pub run: fn() -> Result<(bool, String)>,
}

pub const CHECKS: &[Check] = &[
    Check { id: "1", name: "mgr exactness", run: mgr_exactness },
    Check { id: "2", name: "ideal coarse = Schur", run: ideal_schur },
    Check { id: "3", name: "mfd two-point reduction", run: mfd_two_point },
    Check { id: "4", name: "static condensation", run: static_condensation },
    Check { id: "5", name: "linear patch test", run: patch_test },
    Check { id: "6", name: "mfd mesh independence", run: mfd_scaling },
    Check { id: "7", name: "compositional", run: compositional },
    Check { id: "8", name: "fracture strategies", run: fracture },
    Check { id: "9", name: "griffith opening", run: griffith },
    Check { id: "10", name: "amg poisson", run: amg_poisson },
    Check { id: "control", name: "corrupted transfer caught", run: negative_control },
];

pub fn run_check(check: &Check) -> CheckOutcome {
    let t = Instant::now();
    let (passed, detail) = match (check.run)() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    CheckOutcome {
        id: check.id,
        name: check.name,
        passed,
        detail,
        seconds: t.elapsed().as_secs_f64(),
    }
}

/// Runs every check whose id is in `only` (all when empty), printing each
/// outcome as it completes.
pub fn run_all(only: &[String], mut sink: impl FnMut(&CheckOutcome)) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .filter(|c| only.is_empty() || only.iter().any(|o| o == c.id))
        .map(|c| {
            let out = run_check(c);
            sink(&out);
            out
        })
        .collect()
}

fn solve(a: &SparseMatrix, b: &[f64], part: &DofPartition, s: &MgrStrategy, tol: f64) -> Result<SolveReport> {
    let mgr = MgrHierarchy::setup(a, part, s)?;
    let (_, rep) = gmres(a, b, &mgr, &KrylovConfig::with_tol(tol), None).map_err(mgrkit_core::SolverError::from)?;
    Ok(rep)
}

fn growth(its: &[usize]) -> f64 {
    let lo = its.iter().copied().min().unwrap_or(1).max(1);
    let hi = its.iter().copied().max().unwrap_or(0);
    hi as f64 / lo as f64
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn random_system(rng: &mut ChaCha8Rng, n: usize) -> SparseMatrix {
    let density = (6.0 / n as f64).min(0.3);
    let mut t = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.gen_bool(density) {
                t.push((i, j, rng.gen_range(-1.0..1.0)));
            }
        }
        let sign = if rng.gen_bool(0.3) { -1.0 } else { 1.0 };
        t.push((i, i, sign * (rng.gen_range(2.0..4.0) + n as f64 * density)));
    }
    SparseMatrix::from_triplets(n, n, &t).expect("in-range triplets")
}

/// Random two-field split with both fields non-empty.
fn random_split(rng: &mut ChaCha8Rng, n: usize) -> DofPartition {
    let frac = rng.gen_range(0.2..0.8);
    let mut labels: Vec<&str> = (0..n).map(|_| if rng.gen_bool(frac) { "f" } else { "c" }).collect();
    labels[0] = "f";
    labels[n - 1] = "c";
    DofPartition::from_labels(&labels).expect("two labels")
}

fn exact_strategy() -> MgrStrategy {
    MgrStrategy::new(
        "exact",
        vec![MgrLevelSpec::new(vec!["f"], InterpKind::Ideal, RestrictKind::Injection).with_f_relax(SmootherSpec::dense_lu())],
        CoarseSolverSpec::DenseLu,
    )
}

/// GMRES iterations and true relative residual for one random system, with
/// the interpolation optionally perturbed.
fn exactness_trial(rng: &mut ChaCha8Rng, corrupt: bool) -> Result<(usize, f64)> {
    let n = rng.gen_range(5..=tol::EXACTNESS_MAX_N);
    let a = random_system(rng, n);
    let part = random_split(rng, n);
    let mut mgr = MgrHierarchy::setup(&a, &part, &exact_strategy())?;
    if corrupt {
        mgr.corrupt_interpolation(0, 1.5);
    }
    let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let cfg = KrylovConfig::with_tol(tol::EXACT_RESIDUAL);
    let (x, rep) = gmres(&a, &b, &mgr, &cfg, None).map_err(mgrkit_core::SolverError::from)?;
    let r = a.residual(&b, &x)?;
    Ok((rep.iterations, norm(&r) / norm(&b)))
}

pub fn mgr_exactness() -> Result<(bool, String)> {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_res = 0.0f64;
    let mut bad = Vec::new();
    for trial in 0..tol::EXACTNESS_TRIALS {
        let (its, res) = exactness_trial(&mut rng, false)?;
        worst_res = worst_res.max(res);
        if its != 1 || res > tol::EXACT_RESIDUAL {
            bad.push(trial);
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let ok = bad.is_empty() && secs < tol::EXACTNESS_SECONDS;
    Ok((
        ok,
        format!(
            "{} systems, failing trials {bad:?}, worst true residual {worst_res:.2e}, {secs:.2}s",
            tol::EXACTNESS_TRIALS
        ),
    ))
}

pub fn negative_control() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (its, res) = exactness_trial(&mut rng, true)?;
    let caught = its != 1 || res > tol::EXACT_RESIDUAL;
    Ok((caught, format!("corrupted interpolation: {its} iterations, residual {res:.2e}")))
}

/// Gauss-Jordan inverse with partial pivoting on row-major storage.
fn dense_inverse(mut a: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[piv][k] == 0.0 {
            return None;
        }
        a.swap(k, piv);
        inv.swap(k, piv);
        let d = a[k][k];
        for j in 0..n {
            a[k][j] /= d;
            inv[k][j] /= d;
        }
        for i in 0..n {
            if i != k && a[i][k] != 0.0 {
                let m = a[i][k];
                for j in 0..n {
                    a[i][j] -= m * a[k][j];
                    inv[i][j] -= m * inv[k][j];
                }
            }
        }
    }
    Some(inv)
}

fn dense_block(a: &SparseMatrix, rows: &[usize], cols: &[usize]) -> Vec<Vec<f64>> {
    rows.iter().map(|&i| cols.iter().map(|&j| a.get(i, j)).collect()).collect()
}

pub fn ideal_schur() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = tol::SCHUR_SIZE;
    let mut worst = 0.0f64;
    for _ in 0..tol::SCHUR_TRIALS {
        let a = random_system(&mut rng, n);
        let part = random_split(&mut rng, n);
        let (f, c) = split(&part, &["f"])?;
        let mgr = MgrHierarchy::setup(&a, &part, &exact_strategy())?;
        let inv = dense_inverse(dense_block(&a, f.as_slice(), f.as_slice())).expect("nonsingular F block");
        let afc = dense_block(&a, f.as_slice(), c.as_slice());
        let acf = dense_block(&a, c.as_slice(), f.as_slice());
        let acc = dense_block(&a, c.as_slice(), c.as_slice());
        let (nf, nc) = (f.len(), c.len());
        let mut schur = acc;
        for i in 0..nc {
            for j in 0..nc {
                let mut s = 0.0;
                for k in 0..nf {
                    let col: f64 = (0..nf).map(|l| inv[k][l] * afc[l][j]).sum();
                    s += acf[i][k] * col;
                }
                schur[i][j] -= s;
            }
        }
        let scale = schur.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let coarse = mgr.coarse_operator();
        let ids = mgr.coarse_global_ids();
        let pos: Vec<usize> = ids.iter().map(|g| c.as_slice().binary_search(g).expect("coarse dof is a C dof")).collect();
        for (i, &pi) in pos.iter().enumerate() {
            for (j, &pj) in pos.iter().enumerate() {
                worst = worst.max((coarse.get(i, j) - schur[pi][pj]).abs() / scale);
            }
        }
    }
    Ok((worst <= tol::SCHUR_REL, format!("worst relative deviation {worst:.2e}")))
}

fn mfd_config(n: usize, kind: InnerProductKind) -> MfdConfig {
    let mut cfg = MfdConfig {
        inner_product: kind,
        ..Default::default()
    };
    cfg.mesh.dims = [n; 3];
    cfg
}

pub fn mfd_two_point() -> Result<(bool, String)> {
    let p = mfd::generate(&mfd_config(8, InnerProductKind::Tpfa))?;
    let cond = p.condensed()?;
    let off_diag = cond.a_pipi.triplets().filter(|&(i, j, _)| i != j).count();
    let a = cond.matrix()?;
    let mgr = MgrHierarchy::setup(&a, &cond.partition()?, &mfd::strategy_mgr_pi(InnerProductKind::Tpfa))?;
    let reference = mfd::tpfa_reference_assembly(
        &p.mesh,
        &p.config.fluid,
        &p.layout,
        p.config.permeability,
        &p.state,
        p.config.dt,
    )?;
    let rel = mgr.coarse_operator().max_abs_diff(&reference)? / reference.max_abs();
    Ok((
        off_diag == 0 && rel <= tol::TPFA_REL,
        format!("face-block off-diagonals {off_diag}, reduction vs two-point assembly {rel:.2e}"),
    ))
}

pub fn static_condensation() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for kind in [InnerProductKind::Tpfa, InnerProductKind::Consistent] {
        let cfg = MfdConfig {
            form: SystemForm::Full,
            ..mfd_config(4, kind)
        };
        let p = mfd::generate(&cfg)?;
        let full = p.system.full_matrix()?.to_dense().lu()?.solve(&p.system.full_rhs())?;
        let cond = p.condensed()?;
        let x = cond.matrix()?.to_dense().lu()?.solve(&cond.rhs())?;
        let [nw, nc, npi] = p.system.sizes();
        let scale = full[nw..].iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for j in 0..nc + npi {
            worst = worst.max((full[nw + j] - x[j]).abs() / scale);
        }
    }
    Ok((worst <= tol::CONDENSATION, format!("max pressure difference {worst:.2e}")))
}

pub fn patch_test() -> Result<(bool, String)> {
    let (dims, pert) = (tol::PATCH_DIMS, tol::PATCH_PERTURBATION);
    let cons = mfd::linear_patch_errors(InnerProductKind::Consistent, dims, pert, 5)?;
    let tpfa = mfd::linear_patch_errors(InnerProductKind::Tpfa, dims, pert, 5)?;
    Ok((
        cons.flux <= tol::PATCH_FLUX && tpfa.flux > tol::PATCH_TPFA_MIN,
        format!("flux error consistent {:.2e}, two-point {:.2e}", cons.flux, tpfa.flux),
    ))
}

pub fn mfd_scaling() -> Result<(bool, String)> {
    let t = Instant::now();
    let pairs = [
        (InnerProductKind::Tpfa, "mgr_pi", tol::MFD_MAX_TPFA),
        (InnerProductKind::Consistent, "mgr_p", tol::MFD_MAX_CONSISTENT),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (kind, name, max) in pairs {
        let mut its = Vec::new();
        for n in tol::MFD_SIZES {
            let p = mfd::generate(&mfd_config(n, kind))?;
            let cond = p.condensed()?;
            let s = match name {
                "mgr_pi" => mfd::strategy_mgr_pi(kind),
                _ => mfd::strategy_mgr_p(),
            };
            let rep = solve(&cond.matrix()?, &cond.rhs(), &cond.partition()?, &s, tol::MFD_TOL)?;
            ok &= rep.converged && rep.iterations <= max;
            its.push(rep.iterations);
        }
        let g = growth(&its);
        ok &= g <= tol::GROWTH;
        detail.push(format!("{kind:?}+{name} {its:?} growth {g:.2}"));
    }
    let secs = t.elapsed().as_secs_f64();
    ok &= secs < tol::MFD_SECONDS;
    Ok((ok, format!("{}, {secs:.1}s", detail.join("; "))))
}

pub fn compositional() -> Result<(bool, String)> {
    let mut ok = true;
    let mut its = Vec::new();
    let mut worst = 0.0f64;
    for n in tol::COMP_SIZES {
        let cfg = CompConfig {
            dims: [n; 3],
            ..Default::default()
        };
        let sys = comp::build_comp_system(&cfg)?;
        let mgr = MgrHierarchy::setup(&sys.matrix, &sys.partition, &comp::strategy_compositional())?;

        // Level-1 exactness: the volume block is diagonal, so the Jacobi
        // coarse operator must equal the exact Schur complement.
        let (f, c) = split(&sys.partition, &["rho2"])?;
        let aff = sys.matrix.extract(&f, &f)?;
        ok &= aff.triplets().all(|(i, j, v)| i == j || v == 0.0);
        let inv_d: Vec<f64> = aff.diagonal_values().iter().map(|d| 1.0 / d).collect();
        let schur = sys.matrix.extract(&c, &c)?.add_scaled(
            -1.0,
            &matmul(&sys.matrix.extract(&c, &f)?, &sys.matrix.extract(&f, &c)?.scale_rows(&inv_d)?)?,
        )?;
        worst = worst.max(mgr.operator(1).max_abs_diff(&schur)? / schur.max_abs());

        // F-relaxation never touches a well row.
        let wells = IndexSet::new(sys.well_rows(), sys.matrix.nrows())?;
        ok &= mgr.levels().iter().all(|lv| lv.f_global_ids().iter().all(|&i| !wells.contains(i)));

        let (_, rep) = gmres(&sys.matrix, &sys.rhs, &mgr, &KrylovConfig::with_tol(tol::COMP_TOL), None)
            .map_err(mgrkit_core::SolverError::from)?;
        ok &= rep.converged && rep.iterations <= tol::COMP_MAX;
        its.push(rep.iterations);
    }
    let g = growth(&its);
    ok &= g <= tol::GROWTH && worst <= tol::COMP_LEVEL1_REL;
    Ok((ok, format!("iterations {its:?} growth {g:.2}, level-1 deviation {worst:.2e}, wells never relaxed")))
}

fn frac_config(n: usize) -> FracConfig {
    FracConfig {
        dims: [n, n],
        ..Default::default()
    }
}

pub fn fracture() -> Result<(bool, String)> {
    let sys = frac::build_frac_system(&frac_config(tol::FRAC_ORDER_N))?;
    let (a, part) = (sys.matrix()?, sys.partition()?);
    let u = solve(&a, &sys.rhs, &part, &frac::strategy_mgr_u(), tol::FRAC_ORDER_TOL)?;
    let p = solve(&a, &sys.rhs, &part, &frac::strategy_mgr_p_frac(), tol::FRAC_ORDER_TOL)?;
    let mut ok = u.converged && p.converged && u.iterations <= p.iterations && p.iterations <= tol::FRAC_MAX;

    let mgr = MgrHierarchy::setup(&a, &part, &frac::strategy_mgr_u())?;
    let inv_d: Vec<f64> = sys.a_uu.diagonal_values().iter().map(|d| 1.0 / d).collect();
    let closed = sys.a_pp.add_scaled(-1.0, &matmul(&sys.a_pu, &sys.a_up.scale_rows(&inv_d)?)?)?;
    let rel = mgr.coarse_operator().max_abs_diff(&closed)? / closed.max_abs();
    ok &= rel <= tol::FRAC_SCHUR_REL;

    let mut its = Vec::new();
    for n in tol::FRAC_SIZES {
        let s = frac::build_frac_system(&frac_config(n))?;
        let rep = solve(&s.matrix()?, &s.rhs, &s.partition()?, &frac::strategy_mgr_u(), tol::FRAC_SCALING_TOL)?;
        ok &= rep.converged;
        its.push(rep.iterations);
    }
    let g = growth(&its);
    ok &= g <= tol::GROWTH;
    Ok((
        ok,
        format!(
            "64² iterations mgr_u {} mgr_p {}; coarse vs closed form {rel:.2e}; mgr_u {its:?} growth {g:.2}",
            u.iterations, p.iterations
        ),
    ))
}

pub fn griffith() -> Result<(bool, String)> {
    let sys = frac::build_frac_system(&frac_config(tol::GRIFFITH_N))?;
    let cfg = &sys.config;
    let half = 0.5 * sys.slit.num_cells() as f64 * cfg.h()[0];
    let u = sys.uniform_pressure_displacement(tol::GRIFFITH_PRESSURE)?;
    let w = sys.node_openings(&u).into_iter().fold(0.0f64, f64::max);
    let exact = sys.griffith_opening(tol::GRIFFITH_PRESSURE);
    let rel = (w - exact).abs() / exact;
    let ok = rel <= tol::GRIFFITH_REL && cfg.domain >= 8.0 * half;
    Ok((ok, format!("opening {w:.4e} vs {exact:.4e}, relative error {rel:.3}")))
}

/// Five-point Laplacian on an `m × m` interior grid.
fn poisson_2d(m: usize) -> SparseMatrix {
    let id = |i: usize, j: usize| i + m * j;
    let mut t = Vec::with_capacity(5 * m * m);
    for j in 0..m {
        for i in 0..m {
            t.push((id(i, j), id(i, j), 4.0));
            if i > 0 {
                t.push((id(i, j), id(i - 1, j), -1.0));
            }
            if i + 1 < m {
                t.push((id(i, j), id(i + 1, j), -1.0));
            }
            if j > 0 {
                t.push((id(i, j), id(i, j - 1), -1.0));
            }
            if j + 1 < m {
                t.push((id(i, j), id(i, j + 1), -1.0));
            }
        }
    }
    SparseMatrix::from_triplets(m * m, m * m, &t).expect("in-range triplets")
}

pub fn amg_poisson() -> Result<(bool, String)> {
    let mut its = Vec::new();
    let mut ok = true;
    for m in tol::AMG_SIZES {
        let a = poisson_2d(m);
        let amg = AmgHierarchy::setup(&a, &AmgConfig::default())?;
        let (_, rep) = gmres(&a, &vec![1.0; m * m], &amg, &KrylovConfig::with_tol(tol::AMG_TOL), None)
            .map_err(mgrkit_core::SolverError::from)?;
        ok &= rep.converged && rep.iterations <= tol::AMG_MAX;
        its.push(rep.iterations);
    }
    let g = growth(&its);
    Ok((ok && g <= tol::GROWTH, format!("iterations {its:?} growth {g:.2}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_jordan_inverts() {
        let a = vec![vec![0.0, 2.0], vec![1.0, 1.0]];
        let inv = dense_inverse(a).unwrap();
        assert_eq!(inv, vec![vec![-0.5, 1.0], vec![0.5, 0.0]]);
        assert!(dense_inverse(vec![vec![1.0, 2.0], vec![2.0, 4.0]]).is_none());
    }

    #[test]
    fn growth_of_iteration_counts() {
        assert_eq!(growth(&[6, 9, 8]), 1.5);
    }

    #[test]
    fn check_ids_are_unique() {
        let mut ids: Vec<&str> = CHECKS.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), CHECKS.len());
    }
}

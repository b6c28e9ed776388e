//! `generate`, `solve` and `study` commands.

use std::path::Path;
use std::time::Instant;

use mgrkit_core::mgr::{MgrHierarchy, MgrStrategy};
use mgrkit_core::sparse::mm_write_vector;
use mgrkit_core::{gmres, KrylovConfig};
use mgrkit_problems::ProblemBundle;

use crate::error::{CliError, Result};
use crate::problem::{resolve_strategy, ProblemConfig};
use crate::report::{ReportRow, StudyReport};

pub const SOLUTION_FILE: &str = "x.mtx";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub restart: usize,
    pub max_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        let k = KrylovConfig::default();
        Self {
            tol: 1e-6,
            restart: k.restart,
            max_iters: k.max_iters,
        }
    }
}

pub fn cmd_generate(cfg: &ProblemConfig, out: &Path) -> Result<ProblemBundle> {
    let bundle = cfg.build()?;
    bundle.write(out)?;
    Ok(bundle)
}

/// Checks that every F-field named by the strategy exists in the bundle.
fn check_fields(bundle: &ProblemBundle, strategy: &MgrStrategy) -> Result<()> {
    let fields = bundle.partition.field_order();
    for lv in &strategy.levels {
        for f in &lv.f_fields {
            if !fields.contains(f) {
                return Err(CliError::Usage(format!(
                    "strategy `{}` reduces field `{f}`, but the bundle has fields {fields:?}",
                    strategy.name
                )));
            }
        }
    }
    Ok(())
}

/// MGR setup plus right-preconditioned GMRES on one bundle.
pub fn solve_bundle(bundle: &ProblemBundle, strategy: &MgrStrategy, opts: &SolveOptions) -> Result<(Vec<f64>, ReportRow)> {
    check_fields(bundle, strategy)?;
    let t0 = Instant::now();
    let mgr = MgrHierarchy::setup(&bundle.matrix, &bundle.partition, strategy)?;
    let setup_seconds = t0.elapsed().as_secs_f64();
    let cfg = KrylovConfig {
        restart: opts.restart,
        max_iters: opts.max_iters,
        ..KrylovConfig::with_tol(opts.tol)
    };
    let t1 = Instant::now();
    let (x, rep) = gmres(&bundle.matrix, &bundle.rhs, &mgr, &cfg, None).map_err(mgrkit_core::SolverError::from)?;
    let solve_seconds = t1.elapsed().as_secs_f64();
    let r = bundle.matrix.residual(&bundle.rhs, &x)?;
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let bnorm = norm(&bundle.rhs);
    let true_residual = if bnorm > 0.0 { norm(&r) / bnorm } else { norm(&r) };
    let meta = &bundle.meta;
    let size = match meta.get("dims").and_then(|d| d.as_array()) {
        Some(d) => d.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("x"),
        None => bundle.dim().to_string(),
    };
    let row = ReportRow {
        problem: meta.get("problem").and_then(|v| v.as_str()).unwrap_or("custom").to_string(),
        size,
        dofs: bundle.dim(),
        strategy: strategy.name.clone(),
        tol: opts.tol,
        iterations: rep.iterations,
        setup_seconds,
        solve_seconds,
        converged: rep.converged,
        true_residual,
    };
    Ok((x, row))
}

/// Solves the bundle in `bundle_dir`; writes `x.mtx` and a one-row report
/// into `out`.
pub fn cmd_solve(bundle_dir: &Path, strategy: &str, opts: &SolveOptions, out: &Path) -> Result<ReportRow> {
    if !bundle_dir.is_dir() {
        return Err(CliError::Usage(format!("bundle directory {} does not exist", bundle_dir.display())));
    }
    let bundle = ProblemBundle::read(bundle_dir)?;
    let strategy = resolve_strategy(strategy, &bundle.meta)?;
    let (x, row) = solve_bundle(&bundle, &strategy, opts)?;
    std::fs::create_dir_all(out)?;
    mm_write_vector(out.join(SOLUTION_FILE), &x)?;
    StudyReport::new(vec![row.clone()]).save(out, "report")?;
    Ok(row)
}

/// One row per `(size, strategy)`: each size is generated once and solved
/// with every strategy.
pub fn cmd_study(base: &ProblemConfig, sizes: &[usize], strategies: &[String], opts: &SolveOptions) -> Result<StudyReport> {
    if sizes.len() < 2 {
        return Err(CliError::Usage("a study needs at least two refinements".into()));
    }
    if strategies.is_empty() {
        return Err(CliError::Usage("a study needs at least one strategy".into()));
    }
    let mut rows = Vec::new();
    for &n in sizes {
        let bundle = base.clone().with_size(n).build()?;
        for s in strategies {
            let strategy = resolve_strategy(s, &bundle.meta)?;
            let (_, row) = solve_bundle(&bundle, &strategy, opts)?;
            rows.push(row);
        }
    }
    Ok(StudyReport::new(rows))
}

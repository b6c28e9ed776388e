//! Multigrid reduction (MGR) preconditioning of block systems.
//!
//! Each level splits the current dofs into F-points (the fields eliminated at
//! that level) and C-points, builds transfer operators from the `A_FF`,
//! `A_FC`, `A_CF` blocks and forms the coarse operator `R A P`. Applying the
//! hierarchy to `v` runs, per level: optional global relaxation, one
//! F-relaxation `z += Qᵀ M_FF⁻¹ Q (v − A z)`, restriction of `v − A z`, the
//! coarse correction and interpolation `z += P e`. The coarsest level is
//! solved with the configured coarse solver.

mod partition;
mod strategy;
mod transfer;

pub use partition::{split, DofPartition};
pub use strategy::{CoarseSolverSpec, MgrLevelSpec, MgrStrategy};
pub use transfer::{
    build_interp, build_restrict, coarse_operator, dense_schur, ff_solve, jacobi_schur, InterpKind, RestrictKind,
    MAX_DENSE_IDEAL,
};

use serde::Serialize;

use crate::amg::{AmgConfig, AmgHierarchy, AmgSetupReport};
use crate::error::{Result, SolverError};
use crate::krylov::{gmres, Identity, KrylovConfig, LinearOperator};
use crate::relax::{Smoother, SmootherKind, SmootherSpec};
use crate::sparse::{DenseLu, IndexSet, SparseMatrix};

/// One reduction level of a built hierarchy.
#[derive(Debug, Clone)]
pub struct MgrLevel {
    pub a: SparseMatrix,
    pub f: IndexSet,
    pub c: IndexSet,
    pub p: SparseMatrix,
    pub r: SparseMatrix,
    pub aff: SparseMatrix,
    /// Finest-level index of every dof on this level.
    pub global_ids: Vec<usize>,
    pub partition: DofPartition,
    f_relax: Smoother,
    global_relax: Option<Smoother>,
}

impl MgrLevel {
    /// Finest-level indices of the rows touched by F-relaxation.
    pub fn f_global_ids(&self) -> Vec<usize> {
        self.f.as_slice().iter().map(|&i| self.global_ids[i]).collect()
    }
}

#[derive(Debug, Clone)]
enum CoarseSolver {
    Dense(DenseLu),
    Amg(Box<AmgHierarchy>),
    Gmres {
        cfg: KrylovConfig,
        amg: Option<Box<AmgHierarchy>>,
    },
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct MgrSetupReport {
    pub strategy: String,
    /// Dofs per level, finest first, coarsest last.
    pub level_sizes: Vec<usize>,
    pub f_sizes: Vec<usize>,
    pub level_nnz: Vec<usize>,
    pub coarse_fields: Vec<String>,
    /// AMG setups for F-relaxation (by level) and for the coarse solve.
    pub f_relax_amg: Vec<Option<AmgSetupReport>>,
    pub coarse_amg: Option<AmgSetupReport>,
}

#[derive(Debug, Clone)]
pub struct MgrHierarchy {
    levels: Vec<MgrLevel>,
    coarse_a: SparseMatrix,
    coarse_partition: DofPartition,
    coarse_global_ids: Vec<usize>,
    coarse: CoarseSolver,
    report: MgrSetupReport,
}

/// Fills an unknown map from the partition when the config asks for one.
fn resolve_amg(cfg: &AmgConfig, partition: &DofPartition) -> AmgConfig {
    let mut cfg = cfg.clone();
    if cfg.unknown_based && cfg.unknown_map.is_none() {
        cfg.unknown_map = Some(partition.unknown_ids());
    }
    cfg
}

fn resolve_smoother(spec: &SmootherSpec, partition: &DofPartition) -> SmootherSpec {
    let mut spec = spec.clone();
    if spec.kind == SmootherKind::AmgVcycle {
        let cfg = spec.amg.as_deref().cloned().unwrap_or_default();
        spec.amg = Some(Box::new(resolve_amg(&cfg, partition)));
    }
    spec
}

impl MgrHierarchy {
    pub fn setup(a: &SparseMatrix, partition: &DofPartition, strategy: &MgrStrategy) -> Result<Self> {
        if !a.is_square() || a.nrows() != partition.len() {
            return Err(SolverError::Partition(format!(
                "matrix is {}x{}, partition has {} dofs",
                a.nrows(),
                a.ncols(),
                partition.len()
            )));
        }
        let coarse_fields = strategy.coarse_fields(partition)?;
        let mut report = MgrSetupReport {
            strategy: strategy.name.clone(),
            coarse_fields,
            ..Default::default()
        };

        let mut levels = Vec::with_capacity(strategy.levels.len());
        let mut cur_a = a.clone();
        let mut cur_part = partition.clone();
        let mut cur_ids: Vec<usize> = (0..a.nrows()).collect();
        for spec in &strategy.levels {
            let (f, c) = split(&cur_part, &spec.f_fields)?;
            let layout = spec.ff_block_layout.as_deref();
            let p = build_interp(&cur_a, &f, &c, spec.interp, layout)?;
            let r = build_restrict(&cur_a, &f, &c, spec.restrict, layout)?;
            let next = coarse_operator(&cur_a, &r, &p)?;
            let aff = cur_a.extract(&f, &f)?;
            let f_part = cur_part.restrict(&f);
            let f_relax = Smoother::build(&aff, &resolve_smoother(&spec.f_relax, &f_part))?;
            let global_relax = spec
                .global_relax
                .as_ref()
                .map(|g| Smoother::build(&cur_a, &resolve_smoother(g, &cur_part)))
                .transpose()?;
            report.level_sizes.push(cur_a.nrows());
            report.level_nnz.push(cur_a.nnz());
            report.f_sizes.push(f.len());
            report.f_relax_amg.push(f_relax.amg_report().cloned());

            let next_part = cur_part.restrict(&c);
            let next_ids: Vec<usize> = c.as_slice().iter().map(|&i| cur_ids[i]).collect();
            levels.push(MgrLevel {
                a: std::mem::replace(&mut cur_a, next),
                f,
                c,
                p,
                r,
                aff,
                global_ids: std::mem::replace(&mut cur_ids, next_ids),
                partition: std::mem::replace(&mut cur_part, next_part),
                f_relax,
                global_relax,
            });
        }
        report.level_sizes.push(cur_a.nrows());
        report.level_nnz.push(cur_a.nnz());

        let coarse = match &strategy.coarse_solver {
            CoarseSolverSpec::DenseLu => CoarseSolver::Dense(cur_a.to_dense().lu()?),
            CoarseSolverSpec::AmgVcycle { amg } => {
                let h = AmgHierarchy::setup(&cur_a, &resolve_amg(amg, &cur_part))?;
                report.coarse_amg = Some(h.report().clone());
                CoarseSolver::Amg(Box::new(h))
            }
            CoarseSolverSpec::GmresInner { krylov, amg } => {
                krylov.validate()?;
                let amg = amg
                    .as_ref()
                    .map(|cfg| AmgHierarchy::setup(&cur_a, &resolve_amg(cfg, &cur_part)).map(Box::new))
                    .transpose()?;
                report.coarse_amg = amg.as_ref().map(|h| h.report().clone());
                CoarseSolver::Gmres {
                    cfg: krylov.clone(),
                    amg,
                }
            }
        };
        Ok(Self {
            levels,
            coarse_a: cur_a,
            coarse_partition: cur_part,
            coarse_global_ids: cur_ids,
            coarse,
            report,
        })
    }

    pub fn levels(&self) -> &[MgrLevel] {
        &self.levels
    }

    /// Number of reduction levels (excluding the coarsest grid).
    pub fn num_reductions(&self) -> usize {
        self.levels.len()
    }

    pub fn coarse_operator(&self) -> &SparseMatrix {
        &self.coarse_a
    }

    pub fn coarse_partition(&self) -> &DofPartition {
        &self.coarse_partition
    }

    pub fn coarse_global_ids(&self) -> &[usize] {
        &self.coarse_global_ids
    }

    /// Operator on level `l`; `l == num_reductions()` gives the coarsest grid.
    pub fn operator(&self, l: usize) -> &SparseMatrix {
        self.levels.get(l).map_or(&self.coarse_a, |lv| &lv.a)
    }

    pub fn report(&self) -> &MgrSetupReport {
        &self.report
    }

    pub fn dim(&self) -> usize {
        self.operator(0).nrows()
    }

    /// Scales the F-rows of `P` on `level`; used to check that verification
    /// catches a broken transfer operator.
    #[doc(hidden)]
    pub fn corrupt_interpolation(&mut self, level: usize, factor: f64) {
        let lv = &mut self.levels[level];
        let mut t: Vec<(usize, usize, f64)> = lv.p.triplets().collect();
        let is_f: Vec<bool> = {
            let mut m = vec![false; lv.a.nrows()];
            lv.f.as_slice().iter().for_each(|&i| m[i] = true);
            m
        };
        for e in t.iter_mut().filter(|e| is_f[e.0]) {
            e.2 *= factor;
        }
        lv.p = SparseMatrix::from_triplets(lv.p.nrows(), lv.p.ncols(), &t).expect("same shape");
    }

    /// `z = M⁻¹ v`, one application of the multilevel cycle.
    pub fn apply_vec(&self, v: &[f64]) -> Vec<f64> {
        self.apply_level(0, v)
    }

    fn apply_level(&self, l: usize, v: &[f64]) -> Vec<f64> {
        let Some(level) = self.levels.get(l) else {
            return self.coarse_solve(v);
        };
        let n = v.len();
        let mut z = vec![0.0; n];
        if let Some(g) = &level.global_relax {
            g.apply(&level.a, v, &mut z);
        }

        let mut res = vec![0.0; n];
        level.a.spmv_into(&z, &mut res);
        for (ri, vi) in res.iter_mut().zip(v) {
            *ri = vi - *ri;
        }
        let rf = level.f.gather(&res);
        let mut ef = vec![0.0; rf.len()];
        level.f_relax.apply(&level.aff, &rf, &mut ef);
        level.f.scatter_add(&ef, &mut z);

        level.a.spmv_into(&z, &mut res);
        for (ri, vi) in res.iter_mut().zip(v) {
            *ri = vi - *ri;
        }
        let rc = level.r.spmv(&res).expect("restriction shape");
        let ec = self.apply_level(l + 1, &rc);
        let corr = level.p.spmv(&ec).expect("interpolation shape");
        for (zi, ci) in z.iter_mut().zip(&corr) {
            *zi += ci;
        }
        z
    }

    fn coarse_solve(&self, v: &[f64]) -> Vec<f64> {
        match &self.coarse {
            CoarseSolver::Dense(lu) => {
                let mut z = v.to_vec();
                lu.solve_in_place(&mut z);
                z
            }
            CoarseSolver::Amg(h) => h.vcycle(v),
            CoarseSolver::Gmres { cfg, amg } => {
                let n = v.len();
                let result = match amg {
                    Some(h) => gmres(&self.coarse_a, v, h.as_ref(), cfg, None),
                    None => gmres(&self.coarse_a, v, &Identity(n), cfg, None),
                };
                // A failed inner solve contributes no coarse correction.
                result.map(|(x, _)| x).unwrap_or_else(|_| vec![0.0; n])
            }
        }
    }
}

impl LinearOperator for MgrHierarchy {
    fn nrows(&self) -> usize {
        self.dim()
    }
    fn ncols(&self) -> usize {
        self.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.apply_vec(x));
    }
}

//! Compressible single-phase flow with a hybrid mimetic discretization.
//!
//! [`generate`] builds the mesh and inner products, then runs a fixed number
//! of implicit time steps with Newton's method while the fixed boundary
//! pressures ramp from the initial pressure to their target values. The
//! Jacobian of the first Newton iteration of the last step is the emitted
//! system, in full `(w, p, π)` or condensed `(p, π)` form.

mod inner;
mod patch;
mod system;

pub use inner::{
    consistent_inverse_inner_product, half_transmissibilities, inverse_inner_product, invert_block, Block6,
    CellInnerProducts, InnerProductKind,
};
pub use patch::{linear_patch_errors, PatchErrors};
pub use system::{
    assemble_hybrid, cell_masses, recover_flux, static_condense, tpfa_reference_assembly, BoundarySpec,
    CondensedSystem, DirichletPatch, FluidModel, HybridMfdSystem, MfdLayout, MfdState,
};

use mgrkit_core::amg::AmgConfig;
use mgrkit_core::mgr::{CoarseSolverSpec, InterpKind, MgrHierarchy, MgrLevelSpec, MgrStrategy, RestrictKind};
use mgrkit_core::{gmres, KrylovConfig};
use serde::{Deserialize, Serialize};

use crate::bundle::ProblemBundle;
use crate::error::{ProblemError, Result};
use crate::mesh::{HexMesh, MeshConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    pub max_iters: usize,
    /// Residual reduction that ends a time step.
    pub rel_tol: f64,
    pub linear_tol: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            max_iters: 10,
            rel_tol: 1e-8,
            linear_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemForm {
    Full,
    #[default]
    Condensed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfdConfig {
    pub mesh: MeshConfig,
    pub fluid: FluidModel,
    pub inner_product: InnerProductKind,
    /// Scalar permeability.
    pub permeability: f64,
    /// Weight of the stability term of the consistent inner product.
    pub stability: f64,
    pub dt: f64,
    /// Time steps; the last one supplies the emitted system.
    pub steps: usize,
    pub initial_pressure: f64,
    pub boundary: BoundarySpec,
    pub newton: NewtonConfig,
    pub form: SystemForm,
}

impl Default for MfdConfig {
    fn default() -> Self {
        Self {
            mesh: MeshConfig::default(),
            fluid: FluidModel::default(),
            inner_product: InnerProductKind::Tpfa,
            permeability: 1.0,
            stability: 2.0,
            dt: 1.0,
            steps: 3,
            initial_pressure: 1.0,
            boundary: BoundarySpec::default(),
            newton: NewtonConfig::default(),
            form: SystemForm::Condensed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NewtonStepLog {
    pub step: usize,
    pub residual_norms: Vec<f64>,
    pub linear_iterations: Vec<usize>,
}

/// Everything the driver produced: the emitted Jacobian and its context.
#[derive(Debug, Clone)]
pub struct MfdProblem {
    pub config: MfdConfig,
    pub mesh: HexMesh,
    pub layout: MfdLayout,
    pub inner_products: CellInnerProducts,
    pub state: MfdState,
    pub system: HybridMfdSystem,
    pub newton_log: Vec<NewtonStepLog>,
}

/// Ideal interpolation for `π` when `Ā_ππ` is diagonal (two-point inner
/// product); Jacobi interpolation otherwise.
pub fn strategy_mgr_pi(kind: InnerProductKind) -> MgrStrategy {
    let interp = match kind {
        InnerProductKind::Tpfa => InterpKind::Ideal,
        InnerProductKind::Consistent => InterpKind::Jacobi,
    };
    let mut s = MgrStrategy::new(
        "mgr_pi",
        vec![MgrLevelSpec::new(vec!["pi"], interp, RestrictKind::Injection)],
        CoarseSolverSpec::AmgVcycle { amg: AmgConfig::default() },
    );
    s.notes.push("F-points: face pressures pi; coarse grid: cell pressures p".into());
    if kind == InnerProductKind::Consistent {
        s.notes.push(
            "warning: face block is not diagonal for the consistent inner product; ideal interpolation replaced by jacobi"
                .into(),
        );
    }
    s
}

/// F-points on cell pressures; the coarse grid is the face-pressure system.
pub fn strategy_mgr_p() -> MgrStrategy {
    let mut s = MgrStrategy::new(
        "mgr_p",
        vec![MgrLevelSpec::new(vec!["p"], InterpKind::Jacobi, RestrictKind::Injection)],
        CoarseSolverSpec::AmgVcycle { amg: AmgConfig::default() },
    );
    s.notes.push("F-points: cell pressures p; coarse grid: face pressures pi".into());
    s
}

/// Strategy used for the driver's own Newton solves.
pub fn default_strategy(kind: InnerProductKind) -> MgrStrategy {
    match kind {
        InnerProductKind::Tpfa => strategy_mgr_pi(kind),
        InnerProductKind::Consistent => strategy_mgr_p(),
    }
}

impl MfdConfig {
    pub fn validate(&self) -> Result<()> {
        self.fluid.validate()?;
        if !(self.dt > 0.0) || self.steps == 0 {
            return Err(ProblemError::Config("dt must be positive and steps at least 1".into()));
        }
        if !(self.permeability > 0.0) {
            return Err(ProblemError::Config("permeability must be positive".into()));
        }
        if self.newton.max_iters == 0 {
            return Err(ProblemError::Config("newton.max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Solves one condensed Newton system and returns the full update.
fn newton_update(sys: &HybridMfdSystem, kind: InnerProductKind, tol: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, usize)> {
    let cond = static_condense(sys)?;
    let a = cond.matrix()?;
    let b = cond.rhs();
    let mgr = MgrHierarchy::setup(&a, &cond.partition()?, &default_strategy(kind))?;
    let cfg = KrylovConfig::with_tol(tol);
    let (x, rep) = gmres(&a, &b, &mgr, &cfg, None).map_err(mgrkit_core::SolverError::from)?;
    if !rep.converged {
        return Err(ProblemError::Newton(format!(
            "linear solve stalled at relative residual {:.3e}",
            rep.final_residual
        )));
    }
    let nc = cond.sizes()[0];
    let (dp, dpi) = x.split_at(nc);
    let dw = recover_flux(sys, dp, dpi)?;
    Ok((dp.to_vec(), dpi.to_vec(), dw, rep.iterations))
}

pub fn generate(cfg: &MfdConfig) -> Result<MfdProblem> {
    cfg.validate()?;
    let mesh = HexMesh::build(&cfg.mesh)?;
    let target = MfdLayout::new(&mesh, &cfg.boundary)?;
    let ips = CellInnerProducts::build(&mesh, cfg.inner_product, cfg.permeability, cfg.stability)?;
    let mut state = MfdState::uniform(&target, cfg.initial_pressure);
    let mut log = Vec::new();

    for step in 1..cfg.steps {
        let layout = target.ramped(cfg.initial_pressure, step as f64 / cfg.steps as f64);
        let m_prev = cell_masses(&mesh, &cfg.fluid, &state.p);
        let mut entry = NewtonStepLog {
            step,
            residual_norms: Vec::new(),
            linear_iterations: Vec::new(),
        };
        let mut converged = false;
        for _ in 0..=cfg.newton.max_iters {
            let sys = assemble_hybrid(&mesh, &cfg.fluid, &layout, &ips, &state, &m_prev, cfg.dt)?;
            let norm = sys.residual_norm();
            entry.residual_norms.push(norm);
            if norm <= cfg.newton.rel_tol * entry.residual_norms[0] || norm == 0.0 {
                converged = true;
                break;
            }
            if entry.linear_iterations.len() == cfg.newton.max_iters {
                break;
            }
            let (dp, dpi, dw, its) = newton_update(&sys, cfg.inner_product, cfg.newton.linear_tol)?;
            entry.linear_iterations.push(its);
            state.p.iter_mut().zip(&dp).for_each(|(x, d)| *x += d);
            state.pi.iter_mut().zip(&dpi).for_each(|(x, d)| *x += d);
            state.w.iter_mut().zip(&dw).for_each(|(x, d)| *x += d);
        }
        if !converged {
            return Err(ProblemError::Newton(format!(
                "step {step} did not converge: residuals {:?}",
                entry.residual_norms
            )));
        }
        log.push(entry);
    }

    let m_prev = cell_masses(&mesh, &cfg.fluid, &state.p);
    let layout = target;
    let system = assemble_hybrid(&mesh, &cfg.fluid, &layout, &ips, &state, &m_prev, cfg.dt)?;
    Ok(MfdProblem {
        config: cfg.clone(),
        mesh,
        layout,
        inner_products: ips,
        state,
        system,
        newton_log: log,
    })
}

impl MfdProblem {
    pub fn condensed(&self) -> Result<CondensedSystem> {
        static_condense(&self.system)
    }

    pub fn meta(&self) -> serde_json::Value {
        let cfg = &self.config;
        let nc = self.layout.num_cells;
        let npi = self.layout.num_pi();
        let dofs = match cfg.form {
            SystemForm::Condensed => nc + npi,
            SystemForm::Full => 6 * nc + nc + npi,
        };
        let strategies: Vec<MgrStrategy> = vec![strategy_mgr_pi(cfg.inner_product), strategy_mgr_p()];
        let warnings: Vec<&String> = strategies.iter().flat_map(|s| &s.notes).filter(|n| n.starts_with("warning")).collect();
        serde_json::json!({
            "problem": "mfd",
            "form": cfg.form,
            "dims": cfg.mesh.dims,
            "perturbation": cfg.mesh.perturbation,
            "seed": cfg.mesh.seed,
            "inner_product": cfg.inner_product,
            "dt": cfg.dt,
            "steps": cfg.steps,
            "permeability": cfg.permeability,
            "stability": cfg.stability,
            "fluid": cfg.fluid,
            "boundary": cfg.boundary,
            "cells": nc,
            "faces": self.mesh.num_faces(),
            "fixed_pressure_faces": self.layout.num_dirichlet(),
            "dofs": dofs,
            "newton": self.newton_log,
            "default_strategy": default_strategy(cfg.inner_product).name,
            "warnings": warnings,
        })
    }

    pub fn bundle(&self) -> Result<ProblemBundle> {
        let (a, b, part) = match self.config.form {
            SystemForm::Condensed => {
                let c = self.condensed()?;
                (c.matrix()?, c.rhs(), c.partition()?)
            }
            SystemForm::Full => (
                self.system.full_matrix()?,
                self.system.full_rhs(),
                self.system.full_partition()?,
            ),
        };
        ProblemBundle::new(a, b, part, self.meta())
    }
}

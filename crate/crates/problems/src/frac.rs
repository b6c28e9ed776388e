//! Plane-strain hydraulic-fracture equilibrium systems.
//!
//! A square elastic domain with fixed outer boundary is discretized by
//! bilinear quadrilaterals. A horizontal slit through the center is modeled by
//! duplicating its interior nodes (the two tips stay shared). Fluid pressure
//! lives on the slit edges (fracture cells). Blocks:
//!
//! * `A_uu`: elastic stiffness, 2×2 Gauss quadrature, boundary eliminated.
//! * `A_up`: minus the consistent nodal load of a unit cell pressure, pushing
//!   the two slit faces apart.
//! * `A_pu`: storage sensitivity to the aperture, `ρ_f ℓ J / Δt`, with `J`
//!   the jump operator averaging the two node pairs of a cell.
//! * `A_pp`: storage diagonal plus a two-point cubic-law Laplacian along the
//!   slit at the reference aperture.

use mgrkit_core::amg::{AmgConfig, AmgHierarchy};
use mgrkit_core::mgr::{CoarseSolverSpec, DofPartition, InterpKind, MgrLevelSpec, MgrStrategy, RestrictKind};
use mgrkit_core::relax::SmootherSpec;
use mgrkit_core::{gmres, IndexSet, KrylovConfig, SparseMatrix};
use serde::{Deserialize, Serialize};

use crate::bundle::ProblemBundle;
use crate::error::{ProblemError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FracConfig {
    /// Side length of the square domain.
    pub domain: f64,
    pub dims: [usize; 2],
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub viscosity: f64,
    pub bulk_modulus: f64,
    /// Fracture half-length as a fraction of the domain side.
    pub half_length: f64,
    pub initial_aperture: f64,
    pub dt: f64,
    pub fluid_density: f64,
    /// Injection cell as a fraction along the slit and its mass rate.
    pub injection_position: f64,
    pub injection_rate: f64,
}

impl Default for FracConfig {
    fn default() -> Self {
        Self {
            domain: 80.0,
            dims: [64, 64],
            youngs_modulus: 1e10,
            poisson_ratio: 0.25,
            viscosity: 0.01,
            bulk_modulus: 2e9,
            half_length: 1.0 / 16.0,
            initial_aperture: 1e-4,
            dt: 1.0,
            fluid_density: 1000.0,
            injection_position: 0.5,
            injection_rate: 1e-3,
        }
    }
}

impl FracConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ProblemError::Config(m.into()));
        if !(self.poisson_ratio > 0.0 && self.poisson_ratio < 0.5) {
            return bad("poisson_ratio must lie in (0, 0.5)");
        }
        let positive = [
            self.domain,
            self.youngs_modulus,
            self.viscosity,
            self.bulk_modulus,
            self.initial_aperture,
            self.dt,
            self.fluid_density,
            self.half_length,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return bad("domain, moduli, viscosity, aperture, dt, density and half_length must be positive");
        }
        if self.dims.iter().any(|&d| d < 2) || self.dims[1] % 2 != 0 {
            return bad("dims must be at least 2 and dims[1] even (the slit lies on the middle grid line)");
        }
        if !(0.0..=1.0).contains(&self.injection_position) {
            return bad("injection_position must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn h(&self) -> [f64; 2] {
        [self.domain / self.dims[0] as f64, self.domain / self.dims[1] as f64]
    }
}

/// Slit geometry: the grid columns of the two tips on the middle row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slit {
    pub row: usize,
    pub first: usize,
    pub last: usize,
}

impl Slit {
    pub fn num_cells(&self) -> usize {
        self.last - self.first
    }
}

/// Fracture cell with the dof indices of its two node pairs
/// `(upper uy, lower uy)`; `None` for a tip node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractureCell {
    pub nodes: [usize; 2],
    pub pairs: [Option<(usize, usize)>; 2],
}

#[derive(Debug, Clone)]
pub struct FracSystem {
    pub a_uu: SparseMatrix,
    pub a_up: SparseMatrix,
    pub a_pu: SparseMatrix,
    pub a_pp: SparseMatrix,
    pub rhs: Vec<f64>,
    pub slit: Slit,
    pub cells: Vec<FractureCell>,
    /// Displacement component (0 = x, 1 = y) of every `u` dof.
    pub unknown_map: Vec<usize>,
    pub config: FracConfig,
}

fn locate_slit(cfg: &FracConfig) -> Result<Slit> {
    let [nx, ny] = cfg.dims;
    let h = cfg.h();
    let half_cells = ((cfg.half_length * cfg.domain / h[0]).round() as usize).max(1);
    let center = nx / 2;
    if half_cells >= center || center + half_cells >= nx {
        return Err(ProblemError::Config("slit touches the boundary".into()));
    }
    Ok(Slit {
        row: ny / 2,
        first: center - half_cells,
        last: center + half_cells,
    })
}

/// Plane-strain elasticity matrix (Voigt order xx, yy, xy).
fn elasticity(e: f64, nu: f64) -> [[f64; 3]; 3] {
    let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = e / (2.0 * (1.0 + nu));
    [[lambda + 2.0 * mu, lambda, 0.0], [lambda, lambda + 2.0 * mu, 0.0], [0.0, 0.0, mu]]
}

/// Bilinear quadrilateral stiffness, corners counter-clockwise, dofs
/// `(ux, uy)` per corner; 2×2 Gauss quadrature.
pub fn q4_stiffness(x: &[[f64; 2]; 4], d: &[[f64; 3]; 3]) -> Result<[[f64; 8]; 8]> {
    let g = 1.0 / 3f64.sqrt();
    let xi_n = [-1.0, 1.0, 1.0, -1.0];
    let eta_n = [-1.0, -1.0, 1.0, 1.0];
    let mut k = [[0.0; 8]; 8];
    for &(xi, eta) in &[(-g, -g), (g, -g), (g, g), (-g, g)] {
        let dn_dxi: [f64; 4] = std::array::from_fn(|a| 0.25 * xi_n[a] * (1.0 + eta_n[a] * eta));
        let dn_deta: [f64; 4] = std::array::from_fn(|a| 0.25 * eta_n[a] * (1.0 + xi_n[a] * xi));
        let mut jac = [[0.0; 2]; 2];
        for a in 0..4 {
            jac[0][0] += dn_dxi[a] * x[a][0];
            jac[0][1] += dn_dxi[a] * x[a][1];
            jac[1][0] += dn_deta[a] * x[a][0];
            jac[1][1] += dn_deta[a] * x[a][1];
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if !(det > 0.0) {
            return Err(ProblemError::Geometry("inverted element".into()));
        }
        let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
        let mut b = [[0.0; 8]; 3];
        for a in 0..4 {
            let dx = inv[0][0] * dn_dxi[a] + inv[0][1] * dn_deta[a];
            let dy = inv[1][0] * dn_dxi[a] + inv[1][1] * dn_deta[a];
            b[0][2 * a] = dx;
            b[1][2 * a + 1] = dy;
            b[2][2 * a] = dy;
            b[2][2 * a + 1] = dx;
        }
        for i in 0..8 {
            for j in i..8 {
                let mut s = 0.0;
                for p in 0..3 {
                    for q in 0..3 {
                        s += b[p][i] * d[p][q] * b[q][j];
                    }
                }
                k[i][j] += s * det;
            }
        }
    }
    for i in 0..8 {
        for j in 0..i {
            k[i][j] = k[j][i];
        }
    }
    Ok(k)
}

pub fn build_frac_system(cfg: &FracConfig) -> Result<FracSystem> {
    cfg.validate()?;
    let [nx, ny] = cfg.dims;
    let h = cfg.h();
    let slit = locate_slit(cfg)?;
    let grid = |i: usize, j: usize| i + (nx + 1) * j;
    let n_grid = (nx + 1) * (ny + 1);
    let interior_slit = |i: usize| i > slit.first && i < slit.last;
    let upper_copy = |i: usize| n_grid + (i - slit.first - 1);
    let n_nodes = n_grid + slit.num_cells() - 1;

    // Free nodes get consecutive dof pairs; the outer boundary is fixed.
    let mut dof = vec![None; n_nodes];
    let mut next = 0;
    for j in 0..=ny {
        for i in 0..=nx {
            if i == 0 || j == 0 || i == nx || j == ny {
                continue;
            }
            dof[grid(i, j)] = Some(next);
            next += 2;
            if j == slit.row && interior_slit(i) {
                dof[upper_copy(i)] = Some(next);
                next += 2;
            }
        }
    }
    let nu_dofs = next;

    let dmat = elasticity(cfg.youngs_modulus, cfg.poisson_ratio);
    let ke = q4_stiffness(&[[0.0, 0.0], [h[0], 0.0], [h[0], h[1]], [0.0, h[1]]], &dmat)?;
    let mut trip = Vec::with_capacity(64 * nx * ny);
    for ej in 0..ny {
        for ei in 0..nx {
            let corners = [(ei, ej), (ei + 1, ej), (ei + 1, ej + 1), (ei, ej + 1)];
            let nodes = corners.map(|(i, j)| {
                if ej == slit.row && j == slit.row && interior_slit(i) {
                    upper_copy(i)
                } else {
                    grid(i, j)
                }
            });
            for a in 0..4 {
                let Some(da) = dof[nodes[a]] else { continue };
                for b in 0..4 {
                    let Some(db) = dof[nodes[b]] else { continue };
                    for r in 0..2 {
                        for c in 0..2 {
                            trip.push((da + r, db + c, ke[2 * a + r][2 * b + c]));
                        }
                    }
                }
            }
        }
    }
    let a_uu = SparseMatrix::from_triplets(nu_dofs, nu_dofs, &trip)?;

    // Fracture cells, coupling blocks and the fluid block.
    let m = slit.num_cells();
    let ell = h[0];
    let uy_pair = |i: usize| -> Option<(usize, usize)> {
        interior_slit(i).then(|| (dof[upper_copy(i)].unwrap() + 1, dof[grid(i, slit.row)].unwrap() + 1))
    };
    let mut cells = Vec::with_capacity(m);
    let (mut up, mut pu) = (Vec::new(), Vec::new());
    let rho = cfg.fluid_density;
    for e in 0..m {
        let (a, b) = (slit.first + e, slit.first + e + 1);
        let pairs = [uy_pair(a), uy_pair(b)];
        for &(upper, lower) in pairs.iter().flatten() {
            up.push((upper, e, -0.5 * ell));
            up.push((lower, e, 0.5 * ell));
            pu.push((e, upper, 0.5 * rho * ell / cfg.dt));
            pu.push((e, lower, -0.5 * rho * ell / cfg.dt));
        }
        cells.push(FractureCell {
            nodes: [grid(a, slit.row), grid(b, slit.row)],
            pairs,
        });
    }
    let a_up = SparseMatrix::from_triplets(nu_dofs, m, &up)?;
    let a_pu = SparseMatrix::from_triplets(m, nu_dofs, &pu)?;

    let w0 = cfg.initial_aperture;
    let storage = rho / cfg.bulk_modulus * w0 * ell / cfg.dt;
    let t = rho * w0.powi(3) / (12.0 * cfg.viscosity * ell);
    let mut pp: Vec<(usize, usize, f64)> = (0..m).map(|e| (e, e, storage)).collect();
    for e in 0..m.saturating_sub(1) {
        pp.extend([(e, e, t), (e + 1, e + 1, t), (e, e + 1, -t), (e + 1, e, -t)]);
    }
    let a_pp = SparseMatrix::from_triplets(m, m, &pp)?;

    let mut rhs = vec![0.0; nu_dofs + m];
    let inj = ((cfg.injection_position * m as f64) as usize).min(m - 1);
    rhs[nu_dofs + inj] = cfg.injection_rate;
    let unknown_map = (0..nu_dofs).map(|d| d % 2).collect();
    Ok(FracSystem {
        a_uu,
        a_up,
        a_pu,
        a_pp,
        rhs,
        slit,
        cells,
        unknown_map,
        config: cfg.clone(),
    })
}

/// F-points: displacements, relaxed by one unknown-based AMG V-cycle; the
/// coarse grid is the fracture-pressure system.
pub fn strategy_mgr_u() -> MgrStrategy {
    let amg_u = AmgConfig {
        unknown_based: true,
        ..Default::default()
    };
    let mut s = MgrStrategy::new(
        "mgr_u",
        vec![MgrLevelSpec::new(vec!["u"], InterpKind::Jacobi, RestrictKind::Injection).with_f_relax(SmootherSpec::amg(amg_u))],
        CoarseSolverSpec::AmgVcycle { amg: AmgConfig::default() },
    );
    s.notes.push("F-points: displacements u; coarse grid: fracture pressures p".into());
    s
}

/// F-points: fracture pressures; the coarse grid is the displacement system,
/// solved by unknown-based AMG.
pub fn strategy_mgr_p_frac() -> MgrStrategy {
    let amg_u = AmgConfig {
        unknown_based: true,
        ..Default::default()
    };
    let mut s = MgrStrategy::new(
        "mgr_p",
        vec![MgrLevelSpec::new(vec!["p"], InterpKind::Jacobi, RestrictKind::Injection)
            .with_f_relax(SmootherSpec::amg(AmgConfig::default()))],
        CoarseSolverSpec::AmgVcycle { amg: amg_u },
    );
    s.notes.push("F-points: fracture pressures p; coarse grid: displacements u".into());
    s
}

impl FracSystem {
    pub fn num_u(&self) -> usize {
        self.a_uu.nrows()
    }

    pub fn num_p(&self) -> usize {
        self.a_pp.nrows()
    }

    pub fn matrix(&self) -> Result<SparseMatrix> {
        let s = [self.num_u(), self.num_p()];
        crate::stack_blocks(
            &s,
            &s,
            &[
                (0, 0, &self.a_uu, 1.0),
                (0, 1, &self.a_up, 1.0),
                (1, 0, &self.a_pu, 1.0),
                (1, 1, &self.a_pp, 1.0),
            ],
        )
    }

    /// Fields `{u, p}`; unknown ids 0/1 for the displacement components and 2
    /// for pressure.
    pub fn partition(&self) -> Result<DofPartition> {
        let (nu, np) = (self.num_u(), self.num_p());
        let ids = [vec![0; nu], vec![1; np]].concat();
        let unknowns = [self.unknown_map.clone(), vec![2; np]].concat();
        Ok(DofPartition::from_field_ids(vec!["u".into(), "p".into()], ids)?.with_unknowns(unknowns)?)
    }

    /// Apertures `J u` of every fracture cell.
    pub fn apertures(&self, u: &[f64]) -> Vec<f64> {
        self.cells
            .iter()
            .map(|c| {
                0.5 * c
                    .pairs
                    .iter()
                    .flatten()
                    .map(|&(upper, lower)| u[upper] - u[lower])
                    .sum::<f64>()
            })
            .collect()
    }

    /// Opening `u_upper − u_lower` at every interior slit node.
    pub fn node_openings(&self, u: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .cells
            .iter()
            .filter_map(|c| c.pairs[1])
            .map(|(upper, lower)| u[upper] - u[lower])
            .collect();
        out.truncate(self.num_p().saturating_sub(1));
        out
    }

    /// Displacements under a uniform slit pressure `p̄`: solves
    /// `A_uu u = −A_up p̄` with AMG-preconditioned GMRES.
    pub fn uniform_pressure_displacement(&self, pbar: f64) -> Result<Vec<f64>> {
        let load: Vec<f64> = self.a_up.spmv(&vec![pbar; self.num_p()])?.iter().map(|v| -v).collect();
        let amg = AmgHierarchy::setup(&self.a_uu, &AmgConfig::default().with_unknown_map(self.unknown_map.clone()))?;
        let cfg = KrylovConfig {
            max_iters: 2000,
            ..KrylovConfig::with_tol(1e-12)
        };
        let (u, rep) = gmres(&self.a_uu, &load, &amg, &cfg, None).map_err(mgrkit_core::SolverError::from)?;
        if !rep.converged {
            return Err(ProblemError::Config("elastic solve did not converge".into()));
        }
        Ok(u)
    }

    /// Analytic plane-strain opening at the center of a pressurized crack,
    /// `4 p̄ (1 − ν²) L / E` with `L` the discrete half-length.
    pub fn griffith_opening(&self, pbar: f64) -> f64 {
        let c = &self.config;
        let half = 0.5 * self.slit.num_cells() as f64 * c.h()[0];
        4.0 * pbar * (1.0 - c.poisson_ratio.powi(2)) * half / c.youngs_modulus
    }

    pub fn u_dofs(&self) -> IndexSet {
        IndexSet::range(0, self.num_u())
    }

    pub fn meta(&self) -> serde_json::Value {
        serde_json::json!({
            "problem": "frac",
            "dims": self.config.dims,
            "dofs": self.num_u() + self.num_p(),
            "displacement_dofs": self.num_u(),
            "fracture_cells": self.num_p(),
            "config": self.config,
            "slit": self.slit,
            "cells": self.cells,
            "unknown_map": self.unknown_map,
            "coupling": "A_pu holds the storage-term aperture derivative only; flux-aperture derivatives omitted",
        })
    }

    pub fn bundle(&self) -> Result<ProblemBundle> {
        ProblemBundle::new(self.matrix()?, self.rhs.clone(), self.partition()?, self.meta())
    }
}

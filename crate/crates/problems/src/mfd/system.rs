//! Residual and Jacobian assembly for the hybrid `(w, p, π)` system and its
//! static condensation to `(p, π)`.
//!
//! Unknowns: one-sided face fluxes `w` (six per cell, cell-major), cell
//! pressures `p`, and face pressures `π` on every face without a fixed
//! pressure. Equations per one-sided face `i` of cell `j` on face `f`:
//!
//! * Darcy: `(W⁻¹ w)_i − p_j + π_f − b_i(p_j) = 0`, `b_i = ρ(p_j) g·(x_f − x_j)`,
//! * mass: `m_j(p) − m_jⁿ + Δt Σ_i U_i w_i = 0`, `U_i` the upwinded `ρ/μ`,
//! * continuity: `Σ_{i ∈ f} w_i = 0` for every free face.
//!
//! The face-incidence matrix `C` has `−1` at (one-sided face, free face).

use mgrkit_core::mgr::DofPartition;
use mgrkit_core::sparse::matmul;
use mgrkit_core::SparseMatrix;
use serde::{Deserialize, Serialize};

use super::inner::CellInnerProducts;
use crate::error::{ProblemError, Result};
use crate::mesh::{dot3, sub, HexMesh, Side, Vec3};
use crate::stack_blocks;

/// Fluid and rock properties, each linear in pressure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluidModel {
    pub reference_pressure: f64,
    pub reference_density: f64,
    /// Relative density change per unit pressure.
    pub compressibility: f64,
    pub reference_viscosity: f64,
    pub viscosity_slope: f64,
    pub reference_porosity: f64,
    pub porosity_slope: f64,
    pub gravity: Vec3,
}

impl Default for FluidModel {
    fn default() -> Self {
        Self {
            reference_pressure: 1.0,
            reference_density: 1.0,
            compressibility: 0.1,
            reference_viscosity: 1.0,
            viscosity_slope: 0.05,
            reference_porosity: 0.2,
            porosity_slope: 0.01,
            gravity: [0.0, 0.0, -1.0],
        }
    }
}

impl FluidModel {
    pub fn validate(&self) -> Result<()> {
        let vals = [self.reference_density, self.reference_viscosity, self.reference_porosity];
        if vals.iter().any(|v| !(*v > 0.0)) || self.compressibility < 0.0 {
            return Err(ProblemError::Config(
                "density, viscosity and porosity must be positive at the reference pressure".into(),
            ));
        }
        Ok(())
    }

    pub fn density(&self, p: f64) -> (f64, f64) {
        let d = self.reference_density * self.compressibility;
        (self.reference_density + d * (p - self.reference_pressure), d)
    }

    pub fn viscosity(&self, p: f64) -> (f64, f64) {
        (
            self.reference_viscosity + self.viscosity_slope * (p - self.reference_pressure),
            self.viscosity_slope,
        )
    }

    pub fn porosity(&self, p: f64) -> (f64, f64) {
        (
            self.reference_porosity + self.porosity_slope * (p - self.reference_pressure),
            self.porosity_slope,
        )
    }

    /// `ρ/μ` and its pressure derivative.
    pub fn mobility(&self, p: f64) -> (f64, f64) {
        let (rho, drho) = self.density(p);
        let (mu, dmu) = self.viscosity(p);
        (rho / mu, (drho * mu - rho * dmu) / (mu * mu))
    }

    /// Mass per unit bulk volume `φ ρ` and its derivative.
    pub fn mass_density(&self, p: f64) -> (f64, f64) {
        let (rho, drho) = self.density(p);
        let (phi, dphi) = self.porosity(p);
        (phi * rho, dphi * rho + phi * drho)
    }

    fn check_state(&self, p: f64) -> Result<()> {
        let ok = self.density(p).0 > 0.0 && self.viscosity(p).0 > 0.0 && self.porosity(p).0 > 0.0;
        if !ok || !p.is_finite() {
            return Err(ProblemError::Newton(format!("pressure {p} leaves the valid property range")));
        }
        Ok(())
    }
}

/// Fixed-pressure region on one side of the box. `window` restricts it to
/// `[lo₁, hi₁] × [lo₂, hi₂]` in fractions of the two tangential axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletPatch {
    pub side: Side,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 4]>,
}

/// Boundary faces not covered by a patch are no-flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundarySpec {
    pub dirichlet: Vec<DirichletPatch>,
}

impl Default for BoundarySpec {
    fn default() -> Self {
        Self {
            dirichlet: vec![
                DirichletPatch {
                    side: Side::XMin,
                    value: 2.0,
                    window: None,
                },
                DirichletPatch {
                    side: Side::XMax,
                    value: 1.0,
                    window: None,
                },
            ],
        }
    }
}

/// Which faces carry a `π` unknown and the fixed pressure of the others.
#[derive(Debug, Clone, PartialEq)]
pub struct MfdLayout {
    pub num_cells: usize,
    pub pi_dof: Vec<Option<usize>>,
    pub dirichlet: Vec<Option<f64>>,
    /// Face of every `π` unknown.
    pub pi_faces: Vec<usize>,
}

impl MfdLayout {
    pub fn new(mesh: &HexMesh, bc: &BoundarySpec) -> Result<Self> {
        let nf = mesh.num_faces();
        let mut dirichlet = vec![None; nf];
        let extent = [
            mesh.nodes.iter().map(|x| x[0]).fold(0.0, f64::max),
            mesh.nodes.iter().map(|x| x[1]).fold(0.0, f64::max),
            mesh.nodes.iter().map(|x| x[2]).fold(0.0, f64::max),
        ];
        for (k, patch) in bc.dirichlet.iter().enumerate() {
            let axis = patch.side.axis();
            let (t1, t2) = ((axis + 1) % 3, (axis + 2) % 3);
            let mut hit = false;
            for f in 0..nf {
                if mesh.face_side[f] != Some(patch.side) || dirichlet[f].is_some() {
                    continue;
                }
                let x = mesh.face_centroid[f];
                let inside = patch.window.map_or(true, |w| {
                    let (a, b) = (x[t1] / extent[t1], x[t2] / extent[t2]);
                    a >= w[0] && a <= w[1] && b >= w[2] && b <= w[3]
                });
                if inside {
                    dirichlet[f] = Some(patch.value);
                    hit = true;
                }
            }
            if !hit {
                return Err(ProblemError::Boundary(format!("fixed-pressure patch {k} matches no face")));
            }
        }
        let mut pi_dof = vec![None; nf];
        let mut pi_faces = Vec::new();
        for f in 0..nf {
            if dirichlet[f].is_none() {
                pi_dof[f] = Some(pi_faces.len());
                pi_faces.push(f);
            }
        }
        Ok(Self {
            num_cells: mesh.num_cells(),
            pi_dof,
            dirichlet,
            pi_faces,
        })
    }

    pub fn num_pi(&self) -> usize {
        self.pi_faces.len()
    }

    pub fn num_w(&self) -> usize {
        6 * self.num_cells
    }

    pub fn num_dirichlet(&self) -> usize {
        self.dirichlet.iter().filter(|d| d.is_some()).count()
    }

    /// Copy with fixed pressures moved a fraction `s` of the way from `base`.
    pub fn ramped(&self, base: f64, s: f64) -> Self {
        let mut out = self.clone();
        for d in out.dirichlet.iter_mut().flatten() {
            *d = base + s * (*d - base);
        }
        out
    }

    fn face_pressure(&self, f: usize, pi: &[f64]) -> f64 {
        match self.pi_dof[f] {
            Some(d) => pi[d],
            None => self.dirichlet[f].expect("face is either free or fixed"),
        }
    }
}

/// Point at which the Jacobian is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct MfdState {
    pub p: Vec<f64>,
    pub w: Vec<f64>,
    pub pi: Vec<f64>,
}

impl MfdState {
    pub fn uniform(layout: &MfdLayout, p0: f64) -> Self {
        Self {
            p: vec![p0; layout.num_cells],
            w: vec![0.0; layout.num_w()],
            pi: vec![p0; layout.num_pi()],
        }
    }
}

/// Cell masses `|E| φ ρ`.
pub fn cell_masses(mesh: &HexMesh, fluid: &FluidModel, p: &[f64]) -> Vec<f64> {
    p.iter()
        .zip(&mesh.cell_volume)
        .map(|(&pj, &v)| v * fluid.mass_density(pj).0)
        .collect()
}

/// Upwind source of the face mobility: a cell (with derivative) or a fixed value.
enum Upwind {
    Cell(usize),
    Fixed(f64),
}

fn upwind(mesh: &HexMesh, layout: &MfdLayout, c: usize, l: usize, p: &[f64], pi: &[f64]) -> Upwind {
    let f = mesh.cell_faces[c][l];
    let face_p = layout.face_pressure(f, pi);
    if p[c] - face_p >= 0.0 {
        return Upwind::Cell(c);
    }
    match (mesh.neighbor(c, l), layout.dirichlet[f]) {
        (Some(q), _) => Upwind::Cell(q),
        (None, Some(v)) => Upwind::Fixed(v),
        (None, None) => Upwind::Cell(c),
    }
}

/// Jacobian blocks and Newton right-hand side (`−residual`) of the hybrid system.
#[derive(Debug, Clone)]
pub struct HybridMfdSystem {
    pub a_ww: SparseMatrix,
    /// `A_ww⁻¹`, block diagonal.
    pub a_ww_inv: SparseMatrix,
    pub a_wp: SparseMatrix,
    /// `C`: one-sided faces × free faces, entries `−1`.
    pub a_wpi: SparseMatrix,
    pub a_pw: SparseMatrix,
    pub a_pp: SparseMatrix,
    pub r_w: Vec<f64>,
    pub r_p: Vec<f64>,
    pub r_pi: Vec<f64>,
}

fn block_diag(blocks: &[[[f64; 6]; 6]]) -> Result<SparseMatrix> {
    let mut trip = Vec::with_capacity(36 * blocks.len());
    for (c, b) in blocks.iter().enumerate() {
        for i in 0..6 {
            for j in 0..6 {
                if b[i][j] != 0.0 {
                    trip.push((6 * c + i, 6 * c + j, b[i][j]));
                }
            }
        }
    }
    let n = 6 * blocks.len();
    Ok(SparseMatrix::from_triplets(n, n, &trip)?)
}

/// Evaluates residual and Jacobian at `state`; `m_prev` are the cell masses
/// at the previous time level.
pub fn assemble_hybrid(
    mesh: &HexMesh,
    fluid: &FluidModel,
    layout: &MfdLayout,
    ips: &CellInnerProducts,
    state: &MfdState,
    m_prev: &[f64],
    dt: f64,
) -> Result<HybridMfdSystem> {
    if !(dt > 0.0) {
        return Err(ProblemError::Config("time step must be positive".into()));
    }
    let (nc, nw, npi) = (layout.num_cells, layout.num_w(), layout.num_pi());
    if state.p.len() != nc || state.w.len() != nw || state.pi.len() != npi || m_prev.len() != nc {
        return Err(ProblemError::Config("state does not match the mesh layout".into()));
    }
    state.p.iter().try_for_each(|&p| fluid.check_state(p))?;

    let mut r_w = vec![0.0; nw];
    let mut r_p = vec![0.0; nc];
    let mut r_pi = vec![0.0; npi];
    let mut wp = Vec::with_capacity(nw);
    let mut wpi = Vec::with_capacity(nw);
    let mut pw = Vec::with_capacity(nw);
    let mut pp = Vec::with_capacity(3 * nw);

    for c in 0..nc {
        let pc = state.p[c];
        let (rho, drho) = fluid.density(pc);
        let (md, dmd) = fluid.mass_density(pc);
        let vol = mesh.cell_volume[c];
        let mut f_p = vol * md - m_prev[c];
        pp.push((c, c, vol * dmd));
        for l in 0..6 {
            let i = 6 * c + l;
            let f = mesh.cell_faces[c][l];
            let face_p = layout.face_pressure(f, &state.pi);
            let gdz = dot3(fluid.gravity, sub(mesh.face_centroid[f], mesh.cell_centroid[c]));
            let flux_part: f64 = (0..6).map(|k| ips.w_inv[c][l][k] * state.w[6 * c + k]).sum();
            r_w[i] = -(flux_part - pc + face_p - rho * gdz);
            wp.push((i, c, -1.0 - drho * gdz));
            if let Some(d) = layout.pi_dof[f] {
                wpi.push((i, d, -1.0));
                r_pi[d] += state.w[i];
            }

            let (u, up) = match upwind(mesh, layout, c, l, &state.p, &state.pi) {
                Upwind::Cell(q) => {
                    let (u, du) = fluid.mobility(state.p[q]);
                    (u, Some((q, du)))
                }
                Upwind::Fixed(v) => (fluid.mobility(v).0, None),
            };
            pw.push((c, i, dt * u));
            f_p += dt * u * state.w[i];
            if let Some((q, du)) = up {
                pp.push((c, q, dt * state.w[i] * du));
            }
        }
        r_p[c] = -f_p;
    }

    Ok(HybridMfdSystem {
        a_ww: block_diag(&ips.w_inv)?,
        a_ww_inv: block_diag(&ips.w)?,
        a_wp: SparseMatrix::from_triplets(nw, nc, &wp)?,
        a_wpi: SparseMatrix::from_triplets(nw, npi, &wpi)?,
        a_pw: SparseMatrix::from_triplets(nc, nw, &pw)?,
        a_pp: SparseMatrix::from_triplets(nc, nc, &pp)?,
        r_w,
        r_p,
        r_pi,
    })
}

impl HybridMfdSystem {
    pub fn sizes(&self) -> [usize; 3] {
        [self.a_ww.nrows(), self.a_pp.nrows(), self.a_wpi.ncols()]
    }

    /// `[[A_ww, A_wp, −A_wπ], [A_pw, A_pp, 0], [A_wπᵀ, 0, 0]]`.
    pub fn full_matrix(&self) -> Result<SparseMatrix> {
        let s = self.sizes();
        let ct = self.a_wpi.transpose();
        stack_blocks(
            &s,
            &s,
            &[
                (0, 0, &self.a_ww, 1.0),
                (0, 1, &self.a_wp, 1.0),
                (0, 2, &self.a_wpi, -1.0),
                (1, 0, &self.a_pw, 1.0),
                (1, 1, &self.a_pp, 1.0),
                (2, 0, &ct, 1.0),
            ],
        )
    }

    pub fn full_rhs(&self) -> Vec<f64> {
        [self.r_w.as_slice(), &self.r_p, &self.r_pi].concat()
    }

    pub fn full_partition(&self) -> Result<DofPartition> {
        let [nw, nc, npi] = self.sizes();
        let ids: Vec<usize> = [(0, nw), (1, nc), (2, npi)]
            .iter()
            .flat_map(|&(f, n)| std::iter::repeat(f).take(n))
            .collect();
        Ok(DofPartition::from_field_ids(
            vec!["w".into(), "p".into(), "pi".into()],
            ids,
        )?)
    }

    /// Residual norm of the nonlinear equations at the assembled state.
    pub fn residual_norm(&self) -> f64 {
        self.full_rhs().iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// The `(p, π)` system left after eliminating the fluxes.
#[derive(Debug, Clone)]
pub struct CondensedSystem {
    pub a_pp: SparseMatrix,
    pub a_ppi: SparseMatrix,
    pub a_pip: SparseMatrix,
    pub a_pipi: SparseMatrix,
    pub r_p: Vec<f64>,
    pub r_pi: Vec<f64>,
}

/// Eliminates `w` with the exact block-diagonal inverse of `A_ww`.
pub fn static_condense(sys: &HybridMfdSystem) -> Result<CondensedSystem> {
    let winv_wp = matmul(&sys.a_ww_inv, &sys.a_wp)?;
    let winv_c = matmul(&sys.a_ww_inv, &sys.a_wpi)?;
    let ct = sys.a_wpi.transpose();
    let winv_r = sys.a_ww_inv.spmv(&sys.r_w)?;
    let pw_r = sys.a_pw.spmv(&winv_r)?;
    let ct_r = ct.spmv(&winv_r)?;
    Ok(CondensedSystem {
        a_pp: sys.a_pp.add_scaled(-1.0, &matmul(&sys.a_pw, &winv_wp)?)?,
        a_ppi: matmul(&sys.a_pw, &winv_c)?,
        a_pip: matmul(&ct, &winv_wp)?.scaled(-1.0),
        a_pipi: matmul(&ct, &winv_c)?,
        r_p: sys.r_p.iter().zip(&pw_r).map(|(a, b)| a - b).collect(),
        r_pi: sys.r_pi.iter().zip(&ct_r).map(|(a, b)| a - b).collect(),
    })
}

impl CondensedSystem {
    pub fn sizes(&self) -> [usize; 2] {
        [self.a_pp.nrows(), self.a_pipi.nrows()]
    }

    /// `[[Ā_pp, Ā_pπ], [Ā_πp, Ā_ππ]]`.
    pub fn matrix(&self) -> Result<SparseMatrix> {
        let s = self.sizes();
        stack_blocks(
            &s,
            &s,
            &[
                (0, 0, &self.a_pp, 1.0),
                (0, 1, &self.a_ppi, 1.0),
                (1, 0, &self.a_pip, 1.0),
                (1, 1, &self.a_pipi, 1.0),
            ],
        )
    }

    pub fn rhs(&self) -> Vec<f64> {
        [self.r_p.as_slice(), &self.r_pi].concat()
    }

    pub fn partition(&self) -> Result<DofPartition> {
        let [nc, npi] = self.sizes();
        let ids = [vec![0; nc], vec![1; npi]].concat();
        Ok(DofPartition::from_field_ids(vec!["p".into(), "pi".into()], ids)?)
    }
}

/// Fluxes from the Darcy rows given pressure and face-pressure updates:
/// `w = A_ww⁻¹ (r_w − A_wp p + A_wπ π)`.
pub fn recover_flux(sys: &HybridMfdSystem, p: &[f64], pi: &[f64]) -> Result<Vec<f64>> {
    let ap = sys.a_wp.spmv(p)?;
    let cpi = sys.a_wpi.spmv(pi)?;
    let rhs: Vec<f64> = (0..sys.r_w.len()).map(|i| sys.r_w[i] - ap[i] + cpi[i]).collect();
    Ok(sys.a_ww_inv.spmv(&rhs)?)
}

/// Cell-centered two-point Jacobian assembled directly from harmonic face
/// transmissibilities, upwinded mobilities and the accumulation derivative.
pub fn tpfa_reference_assembly(
    mesh: &HexMesh,
    fluid: &FluidModel,
    layout: &MfdLayout,
    kappa: f64,
    state: &MfdState,
    dt: f64,
) -> Result<SparseMatrix> {
    use super::inner::half_transmissibilities;
    let nc = mesh.num_cells();
    let trans = (0..nc)
        .map(|c| half_transmissibilities(mesh, c, kappa))
        .collect::<Result<Vec<_>>>()?;
    // Sensitivity of the one-sided driving force p_j − π_f + b_i to p_j.
    let drive = |c: usize, l: usize| {
        let f = mesh.cell_faces[c][l];
        let gdz = dot3(fluid.gravity, sub(mesh.face_centroid[f], mesh.cell_centroid[c]));
        1.0 + fluid.density(state.p[c]).1 * gdz
    };
    let mut trip = Vec::new();
    for c in 0..nc {
        trip.push((c, c, mesh.cell_volume[c] * fluid.mass_density(state.p[c]).1));
        for l in 0..6 {
            let i = 6 * c + l;
            let f = mesh.cell_faces[c][l];
            let (u, up) = match upwind(mesh, layout, c, l, &state.p, &state.pi) {
                Upwind::Cell(q) => {
                    let (u, du) = fluid.mobility(state.p[q]);
                    (u, Some((q, du)))
                }
                Upwind::Fixed(v) => (fluid.mobility(v).0, None),
            };
            if let Some((q, du)) = up {
                trip.push((c, q, dt * state.w[i] * du));
            }
            match (mesh.neighbor(c, l), layout.dirichlet[f]) {
                (Some(q), _) => {
                    let lq = l ^ 1;
                    let (ti, tk) = (trans[c][l], trans[q][lq]);
                    let t = ti * tk / (ti + tk);
                    trip.push((c, c, dt * u * t * drive(c, l)));
                    trip.push((c, q, -dt * u * t * drive(q, lq)));
                }
                (None, Some(_)) => trip.push((c, c, dt * u * trans[c][l] * drive(c, l))),
                (None, None) => {}
            }
        }
    }
    Ok(SparseMatrix::from_triplets(nc, nc, &trip)?)
}

//! Linear-pressure reproduction check.

use serde::Serialize;

use super::{
    assemble_hybrid, cell_masses, recover_flux, static_condense, BoundarySpec, CellInnerProducts, DirichletPatch,
    FluidModel, InnerProductKind, MfdLayout, MfdState,
};
use crate::error::Result;
use crate::mesh::{dot3, HexMesh, MeshConfig, Side};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PatchErrors {
    /// Largest face-flux error.
    pub flux: f64,
    /// Largest cell-pressure error at cell centroids.
    pub pressure: f64,
}

/// Solves the steady incompressible problem with every boundary face held at
/// a linear pressure field and reports the worst deviation from it. The
/// condensed system is solved by dense LU, so keep grids small.
pub fn linear_patch_errors(
    kind: InnerProductKind,
    dims: [usize; 3],
    perturbation: f64,
    seed: u64,
) -> Result<PatchErrors> {
    let kappa = 1.3;
    let grad = [1.0, -0.5, 0.25];
    let exact = |x: [f64; 3]| 0.7 + dot3(grad, x);
    let mesh = HexMesh::build(&MeshConfig {
        dims,
        perturbation,
        seed,
        ..Default::default()
    })?;
    let bc = BoundarySpec {
        dirichlet: Side::ALL
            .iter()
            .map(|&side| DirichletPatch {
                side,
                value: 0.0,
                window: None,
            })
            .collect(),
    };
    let mut layout = MfdLayout::new(&mesh, &bc)?;
    for f in 0..mesh.num_faces() {
        if layout.dirichlet[f].is_some() {
            layout.dirichlet[f] = Some(exact(mesh.face_centroid[f]));
        }
    }
    let fluid = FluidModel {
        compressibility: 0.0,
        viscosity_slope: 0.0,
        porosity_slope: 0.0,
        gravity: [0.0; 3],
        ..Default::default()
    };
    let ips = CellInnerProducts::build(&mesh, kind, kappa, 2.0)?;
    let state = MfdState::uniform(&layout, 0.0);
    let m = cell_masses(&mesh, &fluid, &state.p);
    let sys = assemble_hybrid(&mesh, &fluid, &layout, &ips, &state, &m, 1.0)?;
    let cond = static_condense(&sys)?;
    let x = cond.matrix()?.to_dense().lu()?.solve(&cond.rhs())?;
    let nc = mesh.num_cells();
    let w = recover_flux(&sys, &x[..nc], &x[nc..])?;
    let mut errs = PatchErrors {
        flux: 0.0,
        pressure: 0.0,
    };
    for c in 0..nc {
        errs.pressure = errs.pressure.max((x[c] - exact(mesh.cell_centroid[c])).abs());
        for l in 0..6 {
            let (n, a) = mesh.outward(c, l);
            let exact_flux = -kappa * a * dot3(n, grad);
            errs.flux = errs.flux.max((w[6 * c + l] - exact_flux).abs());
        }
    }
    Ok(errs)
}

//! Per-cell inner products relating one-sided face fluxes to pressure drops.
//!
//! For a cell with six faces, `W` maps pressure drops to fluxes and the flux
//! block of the Darcy rows is `W⁻¹`. The two-point choice makes `W` diagonal
//! with half-transmissibilities; the consistent choice reproduces linear
//! pressure fields on distorted cells.

use mgrkit_core::DenseMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ProblemError, Result};
use crate::mesh::{dot3, HexMesh};

pub type Block6 = [[f64; 6]; 6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerProductKind {
    #[default]
    Tpfa,
    Consistent,
}

/// Half-transmissibilities `t_i = a_i (c_i · κ n_i) / (c_i · c_i)` of cell `c`.
pub fn half_transmissibilities(mesh: &HexMesh, c: usize, kappa: f64) -> Result<[f64; 6]> {
    let (nrows, crows) = mesh.cell_face_vectors(c);
    let mut t = [0.0; 6];
    for l in 0..6 {
        let cc = dot3(crows[l], crows[l]);
        let t_l = kappa * dot3(crows[l], nrows[l]) / cc;
        if !(cc > 0.0) || !(t_l > 0.0) || !t_l.is_finite() {
            return Err(ProblemError::Geometry(format!(
                "cell {c}, face {l}: non-positive half-transmissibility"
            )));
        }
        t[l] = t_l;
    }
    Ok(t)
}

/// Orthonormal basis of the column space of a 6×3 matrix (twice-applied
/// Gram-Schmidt); errors when the columns are numerically dependent.
fn orthonormal_columns(m: [[f64; 3]; 6]) -> Option<[[f64; 6]; 3]> {
    let mut q = [[0.0; 6]; 3];
    let scale: f64 = m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    for k in 0..3 {
        let mut v: [f64; 6] = std::array::from_fn(|i| m[i][k]);
        for _ in 0..2 {
            for qj in q.iter().take(k) {
                let d: f64 = (0..6).map(|i| qj[i] * v[i]).sum();
                (0..6).for_each(|i| v[i] -= d * qj[i]);
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n > 1e-12 * scale) {
            return None;
        }
        q[k] = v.map(|x| x / n);
    }
    Some(q)
}

/// Consistent inverse inner product
/// `W = N κ Nᵀ / |E| + (t_stab · 3κ / |E|) · A (I − QQᵀ) A`,
/// with `A` the face areas and `Q` an orthonormal basis of `range(A C)`.
pub fn consistent_inverse_inner_product(mesh: &HexMesh, c: usize, kappa: f64, t_stab: f64) -> Result<Block6> {
    let (nrows, crows) = mesh.cell_face_vectors(c);
    let vol = mesh.cell_volume[c];
    let area: [f64; 6] = std::array::from_fn(|l| mesh.face_area[mesh.cell_faces[c][l]]);
    let ac: [[f64; 3]; 6] = std::array::from_fn(|l| crows[l].map(|v| area[l] * v));
    let q = orthonormal_columns(ac).ok_or_else(|| ProblemError::Geometry(format!("cell {c}: degenerate face vectors")))?;
    let stab = t_stab * 3.0 * kappa / vol;
    let mut w = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in i..6 {
            let proj: f64 = (0..3).map(|k| q[k][i] * q[k][j]).sum();
            let ident = if i == j { 1.0 } else { 0.0 };
            w[i][j] = kappa * dot3(nrows[i], nrows[j]) / vol + stab * area[i] * (ident - proj) * area[j];
            w[j][i] = w[i][j];
        }
    }
    Ok(w)
}

/// Inverse inner product of cell `c` for the chosen kind.
pub fn inverse_inner_product(
    mesh: &HexMesh,
    c: usize,
    kind: InnerProductKind,
    kappa: f64,
    t_stab: f64,
) -> Result<Block6> {
    match kind {
        InnerProductKind::Tpfa => {
            let t = half_transmissibilities(mesh, c, kappa)?;
            let mut w = [[0.0; 6]; 6];
            (0..6).for_each(|l| w[l][l] = t[l]);
            Ok(w)
        }
        InnerProductKind::Consistent => consistent_inverse_inner_product(mesh, c, kappa, t_stab),
    }
}

/// `W⁻¹`, the flux block of the Darcy rows; diagonal blocks are inverted entrywise.
pub fn invert_block(w: &Block6) -> Result<Block6> {
    let diagonal = (0..6).all(|i| (0..6).all(|j| i == j || w[i][j] == 0.0));
    if diagonal {
        let mut out = [[0.0; 6]; 6];
        for l in 0..6 {
            out[l][l] = 1.0 / w[l][l];
        }
        return Ok(out);
    }
    let lu = DenseMatrix::from_rows(&w.iter().map(|r| r.to_vec()).collect::<Vec<_>>())?.lu()?;
    let mut out = [[0.0; 6]; 6];
    for j in 0..6 {
        let mut e = [0.0; 6];
        e[j] = 1.0;
        let col = lu.solve(&e)?;
        (0..6).for_each(|i| out[i][j] = col[i]);
    }
    Ok(out)
}

/// Inner products of every cell: `W` and its inverse.
#[derive(Debug, Clone)]
pub struct CellInnerProducts {
    pub kind: InnerProductKind,
    pub w: Vec<Block6>,
    pub w_inv: Vec<Block6>,
}

impl CellInnerProducts {
    pub fn build(mesh: &HexMesh, kind: InnerProductKind, kappa: f64, t_stab: f64) -> Result<Self> {
        if !(kappa > 0.0) || !(t_stab > 0.0) {
            return Err(ProblemError::Config("permeability and stability weight must be positive".into()));
        }
        let w = (0..mesh.num_cells())
            .map(|c| inverse_inner_product(mesh, c, kind, kappa, t_stab))
            .collect::<Result<Vec<_>>>()?;
        let w_inv = w.iter().map(invert_block).collect::<Result<Vec<_>>>()?;
        Ok(Self { kind, w, w_inv })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshConfig;

    fn mesh(dims: [usize; 3], lengths: [f64; 3], perturbation: f64) -> HexMesh {
        HexMesh::build(&MeshConfig {
            dims,
            lengths,
            perturbation,
            seed: 3,
        })
        .unwrap()
    }

    #[test]
    fn unit_cube_tpfa() {
        let m = mesh([1, 1, 1], [1.0; 3], 0.0);
        for t in half_transmissibilities(&m, 0, 1.0).unwrap() {
            assert!((t - 2.0).abs() < 1e-14);
        }
        let w = inverse_inner_product(&m, 0, InnerProductKind::Tpfa, 1.0, 2.0).unwrap();
        let inv = invert_block(&w).unwrap();
        (0..6).for_each(|l| assert!((inv[l][l] - 0.5).abs() < 1e-14));
        let w2 = inverse_inner_product(&m, 0, InnerProductKind::Tpfa, 2.0, 2.0).unwrap();
        (0..6).for_each(|l| assert!((invert_block(&w2).unwrap()[l][l] - 0.25).abs() < 1e-14));
    }

    #[test]
    fn stretched_cell_tpfa() {
        let m = mesh([1, 1, 1], [2.0, 1.0, 1.0], 0.0);
        let t = half_transmissibilities(&m, 0, 1.0).unwrap();
        assert!((t[0] - 1.0).abs() < 1e-15 && (t[1] - 1.0).abs() < 1e-15);
        // y/z faces: area 2, distance 0.5
        assert!((t[2] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn consistent_block_is_spd_and_consistent() {
        let m = mesh([3, 3, 3], [1.0; 3], 0.35);
        for c in 0..m.num_cells() {
            let w = consistent_inverse_inner_product(&m, c, 1.5, 2.0).unwrap();
            let (nrows, crows) = m.cell_face_vectors(c);
            for i in 0..6 {
                for j in 0..6 {
                    assert_eq!(w[i][j], w[j][i]);
                }
                for k in 0..3 {
                    let wc: f64 = (0..6).map(|j| w[i][j] * crows[j][k]).sum();
                    assert!((wc - 1.5 * nrows[i][k]).abs() < 1e-12, "W C != N kappa");
                }
            }
            assert!(smallest_eigenvalue(&w) > 0.0);
        }
    }

    /// Smallest eigenvalue of a symmetric 6×6 matrix by cyclic Jacobi rotations.
    fn smallest_eigenvalue(w: &Block6) -> f64 {
        let mut a = *w;
        for _ in 0..100 {
            for p in 0..6 {
                for q in p + 1..6 {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let (c, s) = (1.0 / (t * t + 1.0).sqrt(), t / (t * t + 1.0).sqrt());
                    for k in 0..6 {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..6 {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..6).map(|i| a[i][i]).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn block_inverse_roundtrip() {
        let m = mesh([2, 2, 2], [1.0; 3], 0.3);
        let ips = CellInnerProducts::build(&m, InnerProductKind::Consistent, 1.0, 2.0).unwrap();
        for (w, wi) in ips.w.iter().zip(&ips.w_inv) {
            for i in 0..6 {
                for j in 0..6 {
                    let v: f64 = (0..6).map(|k| w[i][k] * wi[k][j]).sum();
                    assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
                }
            }
        }
    }
}

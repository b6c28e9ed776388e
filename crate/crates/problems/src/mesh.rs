//! Structured hexahedral meshes with optional distortion.
//!
//! Nodes sit on a regular grid over `[0, Lx] × [0, Ly] × [0, Lz]`. Distortion
//! moves node heights only, `z = k·hz + α(i,k) + β(j,k)`, which keeps every
//! face planar; cells are then no longer K-orthogonal but face areas,
//! centroids and cell volumes are computed exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ProblemError, Result};

pub type Vec3 = [f64; 3];

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(s: f64, a: Vec3) -> Vec3 {
    [s * a[0], s * a[1], s * a[2]]
}

pub fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm3(a: Vec3) -> f64 {
    dot3(a, a).sqrt()
}

/// Boundary sides of the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    XMin,
    XMax,
    YMin,
    YMax,
    ZMin,
    ZMax,
}

impl Side {
    pub const ALL: [Side; 6] = [Side::XMin, Side::XMax, Side::YMin, Side::YMax, Side::ZMin, Side::ZMax];

    /// Local face index within a cell (`[x−, x+, y−, y+, z−, z+]`).
    pub fn local(self) -> usize {
        self as usize
    }

    pub fn axis(self) -> usize {
        self as usize / 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub dims: [usize; 3],
    pub lengths: [f64; 3],
    /// Maximum node displacement as a fraction of the vertical spacing.
    pub perturbation: f64,
    pub seed: u64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            dims: [8, 8, 8],
            lengths: [1.0, 1.0, 1.0],
            perturbation: 0.3,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HexMesh {
    pub dims: [usize; 3],
    pub nodes: Vec<Vec3>,
    /// Global face of each local face `[x−, x+, y−, y+, z−, z+]`.
    pub cell_faces: Vec<[usize; 6]>,
    /// Corner nodes of each face, ordered around the face.
    pub face_nodes: Vec<[usize; 4]>,
    /// `(lower cell, upper cell)` along the face's axis; `None` outside the box.
    pub face_cells: Vec<[Option<usize>; 2]>,
    pub face_side: Vec<Option<Side>>,
    pub face_area: Vec<f64>,
    /// Unit normal pointing along the positive axis direction.
    pub face_normal: Vec<Vec3>,
    pub face_centroid: Vec<Vec3>,
    pub cell_volume: Vec<f64>,
    pub cell_centroid: Vec<Vec3>,
}

impl HexMesh {
    pub fn build(cfg: &MeshConfig) -> Result<Self> {
        let [nx, ny, nz] = cfg.dims;
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(ProblemError::Config("mesh dims must be positive".into()));
        }
        if !(0.0..0.4).contains(&cfg.perturbation) {
            return Err(ProblemError::Config(format!(
                "perturbation {} outside [0, 0.4)",
                cfg.perturbation
            )));
        }
        if cfg.lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(ProblemError::Config("mesh lengths must be positive".into()));
        }
        let h = [
            cfg.lengths[0] / nx as f64,
            cfg.lengths[1] / ny as f64,
            cfg.lengths[2] / nz as f64,
        ];

        // Height offsets, zero on the bounding planes of their index pairs.
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let amp = 0.5 * cfg.perturbation * h[2];
        let mut offsets = |n: usize| -> Vec<f64> {
            let mut v = vec![0.0; (n + 1) * (nz + 1)];
            for k in 1..nz {
                for i in 1..n {
                    if amp > 0.0 {
                        v[i + (n + 1) * k] = rng.gen_range(-amp..=amp);
                    }
                }
            }
            v
        };
        let alpha = offsets(nx);
        let beta = offsets(ny);

        let node = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
        let mut nodes = vec![[0.0; 3]; (nx + 1) * (ny + 1) * (nz + 1)];
        for k in 0..=nz {
            for j in 0..=ny {
                for i in 0..=nx {
                    nodes[node(i, j, k)] = [
                        i as f64 * h[0],
                        j as f64 * h[1],
                        k as f64 * h[2] + alpha[i + (nx + 1) * k] + beta[j + (ny + 1) * k],
                    ];
                }
            }
        }

        let nfx = (nx + 1) * ny * nz;
        let nfy = nx * (ny + 1) * nz;
        let nfz = nx * ny * (nz + 1);
        let fx = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + ny * k);
        let fy = |i: usize, j: usize, k: usize| nfx + i + nx * (j + (ny + 1) * k);
        let fz = |i: usize, j: usize, k: usize| nfx + nfy + i + nx * (j + ny * k);
        let cell = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);
        let nf = nfx + nfy + nfz;

        let mut face_nodes = vec![[0; 4]; nf];
        let mut face_cells = vec![[None, None]; nf];
        let mut face_side = vec![None; nf];
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..=nx {
                    let f = fx(i, j, k);
                    face_nodes[f] = [node(i, j, k), node(i, j + 1, k), node(i, j + 1, k + 1), node(i, j, k + 1)];
                    face_cells[f] = [(i > 0).then(|| cell(i - 1, j, k)), (i < nx).then(|| cell(i, j, k))];
                    face_side[f] = match i {
                        0 => Some(Side::XMin),
                        _ if i == nx => Some(Side::XMax),
                        _ => None,
                    };
                }
            }
        }
        for k in 0..nz {
            for j in 0..=ny {
                for i in 0..nx {
                    let f = fy(i, j, k);
                    face_nodes[f] = [node(i, j, k), node(i + 1, j, k), node(i + 1, j, k + 1), node(i, j, k + 1)];
                    face_cells[f] = [(j > 0).then(|| cell(i, j - 1, k)), (j < ny).then(|| cell(i, j, k))];
                    face_side[f] = match j {
                        0 => Some(Side::YMin),
                        _ if j == ny => Some(Side::YMax),
                        _ => None,
                    };
                }
            }
        }
        for k in 0..=nz {
            for j in 0..ny {
                for i in 0..nx {
                    let f = fz(i, j, k);
                    face_nodes[f] = [node(i, j, k), node(i + 1, j, k), node(i + 1, j + 1, k), node(i, j + 1, k)];
                    face_cells[f] = [(k > 0).then(|| cell(i, j, k - 1)), (k < nz).then(|| cell(i, j, k))];
                    face_side[f] = match k {
                        0 => Some(Side::ZMin),
                        _ if k == nz => Some(Side::ZMax),
                        _ => None,
                    };
                }
            }
        }

        let mut cell_faces = vec![[0; 6]; nx * ny * nz];
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    cell_faces[cell(i, j, k)] = [
                        fx(i, j, k),
                        fx(i + 1, j, k),
                        fy(i, j, k),
                        fy(i, j + 1, k),
                        fz(i, j, k),
                        fz(i, j, k + 1),
                    ];
                }
            }
        }

        let mut face_area = vec![0.0; nf];
        let mut face_normal = vec![[0.0; 3]; nf];
        let mut face_centroid = vec![[0.0; 3]; nf];
        for f in 0..nf {
            let axis = if f < nfx {
                0
            } else if f < nfx + nfy {
                1
            } else {
                2
            };
            let (area_vec, centroid) = polygon_geometry(&face_nodes[f].map(|n| nodes[n]));
            let area = norm3(area_vec);
            let mut normal = scale(1.0 / area, area_vec);
            if normal[axis] < 0.0 {
                normal = scale(-1.0, normal);
            }
            face_area[f] = area;
            face_normal[f] = normal;
            face_centroid[f] = centroid;
        }

        let mut cell_volume = vec![0.0; cell_faces.len()];
        let mut cell_centroid = vec![[0.0; 3]; cell_faces.len()];
        for (c, faces) in cell_faces.iter().enumerate() {
            let corners: Vec<Vec3> = faces
                .iter()
                .flat_map(|&f| face_nodes[f].iter().map(|&n| nodes[n]))
                .collect();
            let apex = scale(1.0 / corners.len() as f64, corners.iter().fold([0.0; 3], |s, &p| add(s, p)));
            let (mut vol, mut moment) = (0.0, [0.0; 3]);
            for &f in faces {
                let v = face_nodes[f].map(|n| nodes[n]);
                for (a, b) in [(1, 2), (2, 3)] {
                    let tv = dot3(sub(v[0], apex), cross(sub(v[a], apex), sub(v[b], apex))).abs() / 6.0;
                    let tc = scale(0.25, add(add(apex, v[0]), add(v[a], v[b])));
                    vol += tv;
                    moment = add(moment, scale(tv, tc));
                }
            }
            if !(vol > 0.0) {
                return Err(ProblemError::Geometry(format!("cell {c} is degenerate")));
            }
            cell_volume[c] = vol;
            cell_centroid[c] = scale(1.0 / vol, moment);
        }

        let mesh = Self {
            dims: cfg.dims,
            nodes,
            cell_faces,
            face_nodes,
            face_cells,
            face_side,
            face_area,
            face_normal,
            face_centroid,
            cell_volume,
            cell_centroid,
        };
        mesh.check_orientation()?;
        Ok(mesh)
    }

    /// Rejects inverted cells: every outward normal must point away from the
    /// cell centroid.
    fn check_orientation(&self) -> Result<()> {
        for c in 0..self.num_cells() {
            for l in 0..6 {
                let (n, _) = self.outward(c, l);
                let f = self.cell_faces[c][l];
                if dot3(n, sub(self.face_centroid[f], self.cell_centroid[c])) <= 0.0 {
                    return Err(ProblemError::Geometry(format!("cell {c} is inverted at local face {l}")));
                }
            }
        }
        Ok(())
    }

    pub fn num_cells(&self) -> usize {
        self.cell_faces.len()
    }

    pub fn num_faces(&self) -> usize {
        self.face_nodes.len()
    }

    /// Outward unit normal and area of local face `l` of cell `c`.
    pub fn outward(&self, c: usize, l: usize) -> (Vec3, f64) {
        let f = self.cell_faces[c][l];
        let n = self.face_normal[f];
        let sign = if l % 2 == 0 { -1.0 } else { 1.0 };
        (scale(sign, n), self.face_area[f])
    }

    /// The other cell sharing local face `l` of cell `c`.
    pub fn neighbor(&self, c: usize, l: usize) -> Option<usize> {
        let [lo, hi] = self.face_cells[self.cell_faces[c][l]];
        if l % 2 == 0 {
            lo
        } else {
            hi
        }
    }

    /// Rows `a_i n_iᵀ` and `c_iᵀ = (x_f − x_c)ᵀ` for the six faces of cell `c`.
    pub fn cell_face_vectors(&self, c: usize) -> ([Vec3; 6], [Vec3; 6]) {
        let mut nrows = [[0.0; 3]; 6];
        let mut crows = [[0.0; 3]; 6];
        for l in 0..6 {
            let (n, a) = self.outward(c, l);
            nrows[l] = scale(a, n);
            crows[l] = sub(self.face_centroid[self.cell_faces[c][l]], self.cell_centroid[c]);
        }
        (nrows, crows)
    }

    /// Largest entry of `NᵀC − |E| I` over all cells.
    pub fn geometric_identity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for c in 0..self.num_cells() {
            let (nr, cr) = self.cell_face_vectors(c);
            for a in 0..3 {
                for b in 0..3 {
                    let s: f64 = (0..6).map(|l| nr[l][a] * cr[l][b]).sum();
                    let target = if a == b { self.cell_volume[c] } else { 0.0 };
                    worst = worst.max((s - target).abs());
                }
            }
        }
        worst
    }
}

/// Area vector and centroid of a planar polygon (fan triangulation).
fn polygon_geometry(v: &[Vec3]) -> (Vec3, Vec3) {
    let mut area_vec = [0.0; 3];
    let mut moment = [0.0; 3];
    let mut total = 0.0;
    for k in 1..v.len() - 1 {
        let tri = scale(0.5, cross(sub(v[k], v[0]), sub(v[k + 1], v[0])));
        let a = norm3(tri);
        area_vec = add(area_vec, tri);
        let centroid = scale(1.0 / 3.0, add(v[0], add(v[k], v[k + 1])));
        moment = add(moment, scale(a, centroid));
        total += a;
    }
    (area_vec, scale(1.0 / total, moment))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_cell_counts() {
        let m = HexMesh::build(&MeshConfig {
            dims: [2, 1, 1],
            perturbation: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(m.num_cells(), 2);
        assert_eq!(m.num_faces(), 11);
        assert_eq!(m.face_side.iter().filter(|s| s.is_none()).count(), 1);
        assert!(m.geometric_identity_error() <= 1e-15);
        assert_eq!(m.cell_volume, vec![0.5, 0.5]);
    }

    #[test]
    fn unperturbed_cells_are_scaled_cubes() {
        let m = HexMesh::build(&MeshConfig {
            dims: [3, 3, 3],
            perturbation: 0.0,
            ..Default::default()
        })
        .unwrap();
        let h = 1.0 / 3.0;
        for c in 0..m.num_cells() {
            assert!((m.cell_volume[c] - h * h * h).abs() < 1e-15);
        }
        for f in 0..m.num_faces() {
            assert!((m.face_area[f] - h * h).abs() < 1e-15);
        }
    }

    #[test]
    fn perturbed_mesh_keeps_identity_and_is_reproducible() {
        let cfg = MeshConfig {
            dims: [5, 4, 6],
            perturbation: 0.35,
            seed: 7,
            ..Default::default()
        };
        let m = HexMesh::build(&cfg).unwrap();
        assert!(m.geometric_identity_error() <= 1e-12);
        let total: f64 = m.cell_volume.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let again = HexMesh::build(&cfg).unwrap();
        assert_eq!(
            m.nodes.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>(),
            again.nodes.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        let flat = HexMesh::build(&MeshConfig { perturbation: 0.0, ..cfg }).unwrap();
        assert!(m.nodes.iter().zip(&flat.nodes).any(|(a, b)| (a[2] - b[2]).abs() > 1e-3));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(HexMesh::build(&MeshConfig {
            perturbation: 0.5,
            ..Default::default()
        })
        .is_err());
        assert!(HexMesh::build(&MeshConfig {
            dims: [0, 1, 1],
            ..Default::default()
        })
        .is_err());
    }
}

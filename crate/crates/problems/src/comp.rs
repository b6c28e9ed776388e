//! Synthetic Jacobians for two-component compositional flow with
//! multi-segment wells.
//!
//! Reservoir dofs are interleaved per cell as `[p, ρ₁, ρ₂]`, followed by four
//! dofs per well segment `[p^w, ρ₁^w, ρ₂^w, σ^w]` (field `well`). Block
//! structure:
//!
//! * `A_pp`: two-point Laplacian with heterogeneous transmissibilities plus an
//!   accumulation diagonal.
//! * `A_ρ₁ρ₁`: mass diagonal plus first-order upwind advection along the flux
//!   field of a single pressure solve driven by sources at the wells.
//! * `A_ρ₂*`: diagonal volume-constraint rows.
//! * Wells: per segment a mass-balance row, a momentum row for the rate
//!   `σ^w`, a component row and a constraint row. The top segment's `p^w` row
//!   is the well control; under rate control it has a stored zero diagonal.
//!   Perforations couple three reservoir cells to their segments.

use mgrkit_core::amg::{AmgConfig, AmgHierarchy};
use mgrkit_core::mgr::{CoarseSolverSpec, DofPartition, InterpKind, MgrLevelSpec, MgrStrategy, RestrictKind};
use mgrkit_core::relax::SmootherSpec;
use mgrkit_core::{gmres, KrylovConfig, SparseMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bundle::ProblemBundle;
use crate::error::{ProblemError, Result};

pub const FIELDS: [&str; 4] = ["p", "rho1", "rho2", "well"];
pub const DOFS_PER_SEGMENT: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PermeabilitySpec {
    Uniform { value: f64 },
    Lognormal { sigma: f64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WellControl {
    #[default]
    Rate,
    Pressure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WellsConfig {
    pub count: usize,
    pub segments: usize,
    pub perforations: usize,
    pub control: WellControl,
    /// Well-index multiplier of the perforation couplings.
    pub well_index: f64,
    /// Explicit `(i, j)` well columns; evenly spread when empty.
    pub columns: Vec<[usize; 2]>,
}

impl Default for WellsConfig {
    fn default() -> Self {
        Self {
            count: 2,
            segments: 10,
            perforations: 3,
            control: WellControl::Rate,
            well_index: 1.0,
            columns: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompConfig {
    pub dims: [usize; 3],
    pub dt: f64,
    pub permeability: PermeabilitySpec,
    /// Pressure accumulation per unit cell volume and time.
    pub accumulation: f64,
    /// Component-1 mass per unit cell volume and time.
    pub mass: f64,
    /// Largest off-diagonal row sum of the advection block over its mass diagonal.
    pub cfl: f64,
    /// Relative size of the cross-field couplings: accumulation-type entries
    /// scale with the accumulation diagonal, the `ρ₁`-on-`p` flux coupling
    /// with the transport diagonal.
    pub coupling: f64,
    /// Volume-constraint coefficients for `(p, ρ₁, ρ₂)` per unit volume.
    pub volume: [f64; 3],
    pub wells: WellsConfig,
    /// Seed of the right-hand side.
    pub seed: u64,
}

impl Default for CompConfig {
    fn default() -> Self {
        Self {
            dims: [8, 8, 8],
            dt: 1.0,
            permeability: PermeabilitySpec::Lognormal { sigma: 1.0, seed: 7 },
            accumulation: 1.0,
            mass: 1.0,
            cfl: 1.0,
            coupling: 0.1,
            volume: [0.1, -0.5, 1.0],
            wells: WellsConfig::default(),
            seed: 1,
        }
    }
}

impl CompConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ProblemError::Config(m.into()));
        if self.dims.iter().any(|&d| d < 2) {
            return bad("dims must be at least 2 in every direction");
        }
        if !(self.dt > 0.0) || !(self.accumulation > 0.0) || !(self.mass > 0.0) || self.cfl < 0.0 {
            return bad("dt, accumulation and mass must be positive; cfl non-negative");
        }
        if self.volume[2] == 0.0 {
            return bad("volume[2] (the rho2 diagonal) must be nonzero");
        }
        match self.permeability {
            PermeabilitySpec::Uniform { value } if !(value > 0.0) => return bad("permeability must be positive"),
            PermeabilitySpec::Lognormal { sigma, .. } if !(sigma >= 0.0) => return bad("sigma must be non-negative"),
            _ => {}
        }
        let w = &self.wells;
        if w.count > 0 && (w.segments < 2 || w.perforations == 0 || w.perforations > w.segments) {
            return bad("wells need at least 2 segments and 1..=segments perforations");
        }
        if !w.columns.is_empty() && w.columns.len() != w.count {
            return bad("wells.columns must list one column per well");
        }
        Ok(())
    }

    pub fn num_cells(&self) -> usize {
        self.dims.iter().product()
    }
}

/// One perforation: reservoir cell and well segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perforation {
    pub cell: usize,
    pub segment: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellInfo {
    pub column: [usize; 2],
    pub perforations: Vec<Perforation>,
    /// Global row indices of this well's dofs.
    pub rows: Vec<usize>,
    pub control_row: usize,
}

#[derive(Debug, Clone)]
pub struct CompSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub partition: DofPartition,
    pub wells: Vec<WellInfo>,
    pub config: CompConfig,
}

fn default_columns(dims: [usize; 3], count: usize) -> Vec<[usize; 2]> {
    let [nx, ny, _] = dims;
    (0..count)
        .map(|w| {
            let t = (w + 1) as f64 / (count + 1) as f64;
            let i = ((t * nx as f64) as usize).min(nx - 1);
            let j = if w % 2 == 0 { (t * ny as f64) as usize } else { ((1.0 - t) * ny as f64) as usize };
            [i, j.min(ny - 1)]
        })
        .collect()
}

/// Perforated layers, spread evenly over the depth, bottom first.
fn perforation_layers(nz: usize, nperf: usize) -> Vec<usize> {
    if nperf == 1 {
        return vec![0];
    }
    (0..nperf).map(|p| p * (nz - 1) / (nperf - 1)).collect()
}

fn permeabilities(cfg: &CompConfig) -> Vec<f64> {
    let n = cfg.num_cells();
    match cfg.permeability {
        PermeabilitySpec::Uniform { value } => vec![value; n],
        PermeabilitySpec::Lognormal { sigma, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dist = LogNormal::new(0.0, sigma).expect("sigma validated");
            (0..n).map(|_| dist.sample(&mut rng)).collect()
        }
    }
}

/// Neighbor pairs `(i, j)` with `i < j` and their transmissibilities.
fn connections(cfg: &CompConfig, k: &[f64]) -> Vec<(usize, usize, f64)> {
    let [nx, ny, nz] = cfg.dims;
    let h = 1.0 / nx.max(ny).max(nz) as f64;
    let idx = |i: usize, j: usize, l: usize| i + nx * (j + ny * l);
    let mut out = Vec::with_capacity(3 * nx * ny * nz);
    for l in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let c = idx(i, j, l);
                let mut push = |d: usize| out.push((c, d, h * 2.0 * k[c] * k[d] / (k[c] + k[d])));
                if i + 1 < nx {
                    push(idx(i + 1, j, l));
                }
                if j + 1 < ny {
                    push(idx(i, j + 1, l));
                }
                if l + 1 < nz {
                    push(idx(i, j, l + 1));
                }
            }
        }
    }
    out
}

/// Velocity field from one pressure solve with alternating unit sources at
/// the well perforations; returns the flux `F_ij` (positive from `i` to `j`)
/// for every connection.
fn connection_fluxes(a_pp: &SparseMatrix, conns: &[(usize, usize, f64)], source_cells: &[Vec<usize>]) -> Result<Vec<f64>> {
    let n = a_pp.nrows();
    let mut q = vec![0.0; n];
    for (w, cells) in source_cells.iter().enumerate() {
        let sign = if w % 2 == 0 { 1.0 } else { -1.0 };
        for &c in cells {
            q[c] += sign / cells.len() as f64;
        }
    }
    let amg = AmgHierarchy::setup(a_pp, &AmgConfig::default())?;
    let (x, rep) = gmres(a_pp, &q, &amg, &KrylovConfig::with_tol(1e-10), None).map_err(mgrkit_core::SolverError::from)?;
    if !rep.converged {
        return Err(ProblemError::Config("velocity pressure solve did not converge".into()));
    }
    Ok(conns.iter().map(|&(i, j, t)| t * (x[i] - x[j])).collect())
}

pub fn build_comp_system(cfg: &CompConfig) -> Result<CompSystem> {
    cfg.validate()?;
    let [nx, ny, nz] = cfg.dims;
    let nc = cfg.num_cells();
    let h = 1.0 / nx.max(ny).max(nz) as f64;
    let vol = h * h * h;
    let k = permeabilities(cfg);
    let k_mean = k.iter().sum::<f64>() / nc as f64;
    let conns = connections(cfg, &k);
    let cell = |i: usize, j: usize, l: usize| i + nx * (j + ny * l);

    let nw = cfg.wells.count;
    let seg = cfg.wells.segments;
    let mut columns = if cfg.wells.columns.is_empty() {
        default_columns(cfg.dims, nw)
    } else {
        cfg.wells.columns.clone()
    };
    for &[i, j] in &columns {
        if i >= nx || j >= ny {
            return Err(ProblemError::Config(format!("well column ({i}, {j}) outside the grid")));
        }
    }
    // The velocity field needs a source and a sink even with fewer wells.
    if columns.len() < 2 {
        columns.extend(default_columns(cfg.dims, 2).into_iter().skip(columns.len()));
    }
    let layers = perforation_layers(nz, cfg.wells.perforations.max(1));
    let perf_cells: Vec<Vec<usize>> = columns
        .iter()
        .map(|&[i, j]| layers.iter().map(|&l| cell(i, j, l)).collect())
        .collect();

    // Scalar pressure block: Laplacian plus accumulation.
    let acc = cfg.accumulation * vol / cfg.dt;
    let mut lap = Vec::with_capacity(7 * nc);
    for &(i, j, t) in &conns {
        lap.extend([(i, i, t), (j, j, t), (i, j, -t), (j, i, -t)]);
    }
    let laplacian = SparseMatrix::from_triplets(nc, nc, &lap)?;
    let a_pp = laplacian.add_scaled(1.0, &SparseMatrix::diagonal(&vec![acc; nc]))?;

    // Upwind advection for component 1.
    let fluxes = connection_fluxes(&a_pp, &conns, &perf_cells)?;
    let mut adv = Vec::with_capacity(4 * conns.len());
    for (&(i, j, _), &f) in conns.iter().zip(&fluxes) {
        let (from, to, f) = if f >= 0.0 { (i, j, f) } else { (j, i, -f) };
        adv.push((from, from, f));
        adv.push((to, from, -f));
    }
    let adv = SparseMatrix::from_triplets(nc, nc, &adv)?;
    let max_inflow = (0..nc)
        .map(|r| {
            let (cols, vals) = adv.row(r);
            cols.iter().zip(vals).filter(|(&c, _)| c != r).map(|(_, v)| v.abs()).sum::<f64>()
        })
        .fold(0.0, f64::max);
    let mass = cfg.mass * vol / cfg.dt;
    let adv_scale = if max_inflow > 0.0 { cfg.cfl * mass / max_inflow } else { 0.0 };
    let a_11 = adv.scaled(adv_scale).add_scaled(1.0, &SparseMatrix::diagonal(&vec![mass; nc]))?;

    let d_p = a_pp.diagonal_values().iter().sum::<f64>() / nc as f64;
    let d_1 = a_11.diagonal_values().iter().sum::<f64>() / nc as f64;
    let c = cfg.coupling;
    let mut t: Vec<(usize, usize, f64)> = Vec::new();
    let (p, r1, r2) = (|c: usize| 3 * c, |c: usize| 3 * c + 1, |c: usize| 3 * c + 2);
    for (i, j, v) in a_pp.triplets() {
        t.push((p(i), p(j), v));
    }
    for (i, j, v) in a_11.triplets() {
        t.push((r1(i), r1(j), v));
    }
    for (i, j, v) in laplacian.triplets() {
        t.push((r1(i), p(j), c * d_1 / d_p * v));
    }
    for i in 0..nc {
        t.push((p(i), r1(i), c * acc));
        t.push((p(i), r2(i), c * acc));
        t.push((r1(i), r2(i), c * mass));
        t.push((r2(i), p(i), cfg.volume[0] * vol));
        t.push((r2(i), r1(i), cfg.volume[1] * vol));
        t.push((r2(i), r2(i), cfg.volume[2] * vol));
    }

    // Wells.
    let base = 3 * nc;
    let t_w = 10.0 * h * k_mean;
    let c_w = 1e-3 * h * k_mean;
    let mut wells = Vec::with_capacity(nw);
    for w in 0..nw {
        let off = base + DOFS_PER_SEGMENT * seg * w;
        let wp = |s: usize| off + DOFS_PER_SEGMENT * s;
        let (w1, w2, ws) = (|s: usize| wp(s) + 1, |s: usize| wp(s) + 2, |s: usize| wp(s) + 3);
        let perfs: Vec<Perforation> = perf_cells[w]
            .iter()
            .enumerate()
            .map(|(q, &cell)| Perforation {
                cell,
                segment: seg - 1 - q,
            })
            .collect();
        for s in 0..seg {
            // Mass balance of segment s; the top segment keeps it in its rate row.
            let mass_row = if s == 0 { ws(0) } else { wp(s) };
            t.push((mass_row, wp(s), c_w));
            t.push((mass_row, ws(s), 1.0));
            if s + 1 < seg {
                t.push((mass_row, ws(s + 1), -1.0));
            }
            // Momentum: rate between s and s−1 driven by the pressure difference.
            if s > 0 {
                t.push((ws(s), ws(s), 1.0));
                t.push((ws(s), wp(s), -t_w));
                t.push((ws(s), wp(s - 1), t_w));
            }
            // Component 1: storage plus upwind transport from below.
            let theta = 0.5 * t_w;
            t.push((w1(s), w1(s), c_w + theta));
            t.push((w1(s), ws(s), 0.5));
            if s + 1 < seg {
                t.push((w1(s), w1(s + 1), -theta));
                t.push((w1(s), ws(s + 1), -0.5));
            }
            // Volume constraint.
            t.push((w2(s), wp(s), cfg.volume[0] * vol));
            t.push((w2(s), w1(s), cfg.volume[1] * vol));
            t.push((w2(s), w2(s), cfg.volume[2] * vol));
        }
        match cfg.wells.control {
            WellControl::Rate => {
                t.push((wp(0), wp(0), 0.0));
                t.push((wp(0), ws(0), 1.0));
            }
            WellControl::Pressure => t.push((wp(0), wp(0), 1.0)),
        }
        for pf in &perfs {
            let wi = cfg.wells.well_index * h * k[pf.cell];
            let mass_row = if pf.segment == 0 { ws(0) } else { wp(pf.segment) };
            t.extend([
                (p(pf.cell), p(pf.cell), wi),
                (p(pf.cell), wp(pf.segment), -wi),
                (mass_row, wp(pf.segment), wi),
                (mass_row, p(pf.cell), -wi),
                (r1(pf.cell), r1(pf.cell), 0.5 * wi),
                (r1(pf.cell), w1(pf.segment), -0.5 * wi),
                (w1(pf.segment), w1(pf.segment), 0.5 * wi),
                (w1(pf.segment), r1(pf.cell), -0.5 * wi),
            ]);
        }
        wells.push(WellInfo {
            column: columns[w],
            perforations: perfs,
            rows: (off..off + DOFS_PER_SEGMENT * seg).collect(),
            control_row: wp(0),
        });
    }

    let n = base + DOFS_PER_SEGMENT * seg * nw;
    let matrix = SparseMatrix::from_triplets(n, n, &t)?;
    let mut field_of = Vec::with_capacity(n);
    for _ in 0..nc {
        field_of.extend([0, 1, 2]);
    }
    field_of.extend(std::iter::repeat(3).take(n - base));
    let partition = DofPartition::from_field_ids(FIELDS.iter().map(|s| s.to_string()).collect(), field_of)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rhs: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok(CompSystem {
        matrix,
        rhs,
        partition,
        wells,
        config: cfg.clone(),
    })
}

/// Reduces `ρ₂`, then `ρ₁`, then `p` (with an AMG V-cycle as F-relaxation),
/// keeping the well dofs for a direct coarse solve.
pub fn strategy_compositional() -> MgrStrategy {
    let level = |f: &str| MgrLevelSpec::new(vec![f], InterpKind::Jacobi, RestrictKind::Injection);
    MgrStrategy::new(
        "mgr_comp",
        vec![
            level("rho2"),
            level("rho1"),
            level("p").with_f_relax(SmootherSpec::amg(AmgConfig::default())),
        ],
        CoarseSolverSpec::DenseLu,
    )
}

/// Variant without wells: the pressure system is the coarse grid, solved by AMG.
pub fn strategy_compositional_no_wells() -> MgrStrategy {
    let level = |f: &str| MgrLevelSpec::new(vec![f], InterpKind::Jacobi, RestrictKind::Injection);
    MgrStrategy::new(
        "mgr_comp_no_wells",
        vec![level("rho2"), level("rho1")],
        CoarseSolverSpec::AmgVcycle { amg: AmgConfig::default() },
    )
}

/// The 4-level strategy when wells are present, the 3-level one otherwise.
pub fn default_strategy(cfg: &CompConfig) -> MgrStrategy {
    if cfg.wells.count > 0 {
        strategy_compositional()
    } else {
        strategy_compositional_no_wells()
    }
}

impl CompSystem {
    pub fn well_rows(&self) -> Vec<usize> {
        self.wells.iter().flat_map(|w| w.rows.iter().copied()).collect()
    }

    pub fn meta(&self) -> serde_json::Value {
        serde_json::json!({
            "problem": "comp",
            "dims": self.config.dims,
            "cells": self.config.num_cells(),
            "dofs": self.matrix.nrows(),
            "config": self.config,
            "wells": self.wells,
            "control_rows": self.wells.iter().map(|w| w.control_row).collect::<Vec<_>>(),
            "default_strategy": default_strategy(&self.config).name,
        })
    }

    pub fn bundle(&self) -> Result<ProblemBundle> {
        ProblemBundle::new(self.matrix.clone(), self.rhs.clone(), self.partition.clone(), self.meta())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mgrkit_core::mgr::{build_interp, coarse_operator, split, MgrHierarchy};
    use mgrkit_core::{DenseMatrix, IndexSet};

    fn cfg(n: usize, wells: usize) -> CompConfig {
        CompConfig {
            dims: [n; 3],
            wells: WellsConfig {
                count: wells,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    fn block(sys: &CompSystem, a: &str, b: &str) -> SparseMatrix {
        let ra = sys.partition.dofs_of(&[a]).unwrap();
        let rb = sys.partition.dofs_of(&[b]).unwrap();
        sys.matrix.extract(&ra, &rb).unwrap()
    }

    #[test]
    fn dof_count_and_fields() {
        let s = build_comp_system(&cfg(4, 2)).unwrap();
        assert_eq!(s.matrix.nrows(), 272);
        assert_eq!(s.partition.field_order().len(), 4);
        assert_eq!(s.well_rows().len(), 80);
    }

    #[test]
    fn volume_rows_are_diagonal() {
        let s = build_comp_system(&cfg(4, 2)).unwrap();
        for other in ["p", "rho1", "rho2"] {
            let b = block(&s, "rho2", other);
            assert_eq!(b.triplets().filter(|&(i, j, _)| i != j).count(), 0, "rho2/{other}");
            assert_eq!(b.nnz(), 64);
        }
        assert_eq!(block(&s, "rho2", "well").nnz(), 0);
    }

    #[test]
    fn control_rows_have_zero_diagonal() {
        let s = build_comp_system(&cfg(4, 2)).unwrap();
        for w in &s.wells {
            assert!(s.matrix.has_entry(w.control_row, w.control_row));
            assert_eq!(s.matrix.get(w.control_row, w.control_row), 0.0);
        }
        let mut c = cfg(4, 2);
        c.wells.control = WellControl::Pressure;
        let s = build_comp_system(&c).unwrap();
        assert!(s.wells.iter().all(|w| s.matrix.get(w.control_row, w.control_row) != 0.0));
    }

    #[test]
    fn pressure_block_is_elliptic_and_transport_is_upwind() {
        let s = build_comp_system(&cfg(5, 2)).unwrap();
        let app = block(&s, "p", "p");
        for i in 0..app.nrows() {
            let (cols, vals) = app.row(i);
            assert!(cols.len() <= 7);
            let off: f64 = cols.iter().zip(vals).filter(|(&c, _)| c != i).map(|(_, v)| *v).sum();
            assert!(app.get(i, i) > 0.0 && cols.iter().zip(vals).all(|(&c, &v)| c == i || v <= 0.0));
            assert!(app.get(i, i) + off > 0.0);
        }
        let a11 = block(&s, "rho1", "rho1");
        for i in 0..a11.nrows() {
            let (cols, vals) = a11.row(i);
            let off: f64 = cols.iter().zip(vals).filter(|(&c, _)| c != i).map(|(_, v)| v.abs()).sum();
            assert!(a11.get(i, i) > 0.0);
            assert!(cols.iter().zip(vals).all(|(&c, &v)| c == i || v <= 0.0));
            assert!(off <= 1.0000001 * s.config.mass / 125.0);
        }
    }

    #[test]
    fn wells_do_not_interact() {
        let s = build_comp_system(&cfg(4, 2)).unwrap();
        let (w0, w1) = (&s.wells[0].rows, &s.wells[1].rows);
        for &r in w0 {
            let (cols, _) = s.matrix.row(r);
            assert!(cols.iter().all(|c| !w1.contains(c)));
        }
        assert_eq!(s.wells[0].perforations.len(), 3);
    }

    #[test]
    fn first_level_reduction_is_exact() {
        let s = build_comp_system(&cfg(4, 2)).unwrap();
        let (f, c) = split(&s.partition, &["rho2"]).unwrap();
        let p = build_interp(&s.matrix, &f, &c, InterpKind::Jacobi, None).unwrap();
        let r = mgrkit_core::mgr::build_restrict(&s.matrix, &f, &c, RestrictKind::Injection, None).unwrap();
        let rap = coarse_operator(&s.matrix, &r, &p).unwrap();
        // Independent oracle: dense LU of A_FF applied column by column.
        let aff = s.matrix.extract(&f, &f).unwrap().to_dense().lu().unwrap();
        let afc = s.matrix.extract(&f, &c).unwrap().to_dense();
        let acf = s.matrix.extract(&c, &f).unwrap().to_dense();
        let acc = s.matrix.extract(&c, &c).unwrap().to_dense();
        let mut x = DenseMatrix::zeros(f.len(), c.len());
        for j in 0..c.len() {
            let col: Vec<f64> = (0..f.len()).map(|i| afc[(i, j)]).collect();
            let sol = aff.solve(&col).unwrap();
            (0..f.len()).for_each(|i| x[(i, j)] = sol[i]);
        }
        let prod = acf.matmul(&x).unwrap();
        let d = rap.to_dense();
        let scale = s.matrix.max_abs();
        for i in 0..c.len() {
            for j in 0..c.len() {
                assert!((d[(i, j)] - (acc[(i, j)] - prod[(i, j)])).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn strategy_levels_and_well_rows_never_relaxed() {
        let s = build_comp_system(&cfg(6, 2)).unwrap();
        let mgr = MgrHierarchy::setup(&s.matrix, &s.partition, &strategy_compositional()).unwrap();
        assert_eq!(mgr.num_reductions(), 3);
        assert_eq!(mgr.coarse_operator().nrows(), s.well_rows().len());
        let wells: IndexSet = IndexSet::new(s.well_rows(), s.matrix.nrows()).unwrap();
        for lv in mgr.levels() {
            assert!(lv.f_global_ids().iter().all(|&i| !wells.contains(i)));
        }
        let (_, rep) = gmres(&s.matrix, &s.rhs, &mgr, &KrylovConfig::with_tol(1e-6), None).unwrap();
        assert!(rep.converged && rep.iterations <= 40, "{}", rep.iterations);
    }

    #[test]
    fn deterministic_and_validated() {
        let a = build_comp_system(&cfg(3, 1)).unwrap();
        let b = build_comp_system(&cfg(3, 1)).unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert_eq!(a.rhs, b.rhs);
        let mut bad = cfg(3, 1);
        bad.wells.columns = vec![[9, 9]];
        assert!(build_comp_system(&bad).is_err());
        assert!(build_comp_system(&cfg(1, 1)).is_err());
    }
}

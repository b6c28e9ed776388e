//! Structural invariants of the generators over randomized configurations.

use mgrkit_core::mgr::{split, MgrHierarchy};
use mgrkit_core::sparse::matmul;
use mgrkit_core::IndexSet;
use mgrkit_problems::comp::{build_comp_system, strategy_compositional, CompConfig, WellControl, WellsConfig};
use mgrkit_problems::frac::{build_frac_system, FracConfig};
use mgrkit_problems::mesh::{HexMesh, MeshConfig};
use mgrkit_problems::mfd::{generate, recover_flux, InnerProductKind, MfdConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn perturbed_meshes_keep_planar_faces(
        nx in 1usize..5, ny in 1usize..5, nz in 1usize..5,
        pert in 0.0f64..0.39, seed in 0u64..1000,
    ) {
        let mesh = HexMesh::build(&MeshConfig { dims: [nx, ny, nz], perturbation: pert, seed, ..Default::default() }).unwrap();
        prop_assert!(mesh.geometric_identity_error() <= 1e-12);
        let volume: f64 = mesh.cell_volume.iter().sum();
        prop_assert!((volume - 1.0).abs() <= 1e-12);
        prop_assert!(mesh.cell_volume.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn frac_coupling_is_action_reaction(n in 4usize..12, frac_len in 0.1f64..0.3) {
        let sys = build_frac_system(&FracConfig { dims: [2 * n, 2 * n], half_length: frac_len, ..Default::default() }).unwrap();
        for c in &sys.cells {
            for &(upper, lower) in c.pairs.iter().flatten() {
                let (cu, vu) = sys.a_up.row(upper);
                let (cl, vl) = sys.a_up.row(lower);
                prop_assert_eq!(cu, cl);
                prop_assert!(vu.iter().zip(vl).all(|(a, b)| *a == -*b));
            }
        }
        prop_assert_eq!(sys.a_uu.max_abs_diff(&sys.a_uu.transpose()).unwrap(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn frac_aperture_is_linear(n in 4usize..9, pbar in 1e4f64..1e7) {
        let sys = build_frac_system(&FracConfig { dims: [2 * n, 2 * n], half_length: 0.2, ..Default::default() }).unwrap();
        let w1 = sys.apertures(&sys.uniform_pressure_displacement(pbar).unwrap());
        let w2 = sys.apertures(&sys.uniform_pressure_displacement(2.0 * pbar).unwrap());
        let scale = w2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(scale > 0.0);
        prop_assert!(w1.iter().zip(&w2).all(|(a, b)| (b - 2.0 * a).abs() <= 1e-9 * scale));
    }

    #[test]
    fn condensed_and_full_solutions_agree(
        n in 2usize..4, consistent in any::<bool>(), seed in 0u64..100,
    ) {
        let kind = if consistent { InnerProductKind::Consistent } else { InnerProductKind::Tpfa };
        let mut cfg = MfdConfig { inner_product: kind, steps: 2, ..Default::default() };
        cfg.mesh.dims = [n, n + 1, n];
        cfg.mesh.seed = seed;
        let p = generate(&cfg).unwrap();
        let full = p.system.full_matrix().unwrap().to_dense().lu().unwrap().solve(&p.system.full_rhs()).unwrap();
        let cond = p.condensed().unwrap();
        let x = cond.matrix().unwrap().to_dense().lu().unwrap().solve(&cond.rhs()).unwrap();
        let [nw, nc, npi] = p.system.sizes();
        let scale = full.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for j in 0..nc + npi {
            prop_assert!((full[nw + j] - x[j]).abs() <= 1e-10 * scale);
        }
        let w = recover_flux(&p.system, &x[..nc], &x[nc..]).unwrap();
        prop_assert!(w.iter().zip(&full[..nw]).all(|(a, b)| (a - b).abs() <= 1e-9 * scale));
    }

    #[test]
    fn comp_first_reduction_is_exact_and_wells_stay_coarse(
        n in 3usize..6, wells in 0usize..3, pressure_control in any::<bool>(), seed in 0u64..50,
    ) {
        let cfg = CompConfig {
            dims: [n; 3],
            wells: WellsConfig {
                count: wells,
                control: if pressure_control { WellControl::Pressure } else { WellControl::Rate },
                ..Default::default()
            },
            seed,
            ..Default::default()
        };
        let sys = build_comp_system(&cfg).unwrap();
        let (f, c) = split(&sys.partition, &["rho2"]).unwrap();
        let aff = sys.matrix.extract(&f, &f).unwrap();
        prop_assert!(aff.triplets().all(|(i, j, _)| i == j));
        let inv_d: Vec<f64> = aff.diagonal_values().iter().map(|d| 1.0 / d).collect();
        let schur = sys.matrix.extract(&c, &c).unwrap().add_scaled(
            -1.0,
            &matmul(&sys.matrix.extract(&c, &f).unwrap(), &sys.matrix.extract(&f, &c).unwrap().scale_rows(&inv_d).unwrap()).unwrap(),
        ).unwrap();
        let strategy = if wells > 0 { strategy_compositional() } else { mgrkit_problems::comp::strategy_compositional_no_wells() };
        let mgr = MgrHierarchy::setup(&sys.matrix, &sys.partition, &strategy).unwrap();
        prop_assert!(mgr.operator(1).max_abs_diff(&schur).unwrap() <= 1e-12 * schur.max_abs());
        let well_rows = IndexSet::new(sys.well_rows(), sys.matrix.nrows()).unwrap();
        for lv in mgr.levels() {
            prop_assert!(lv.f_global_ids().iter().all(|&i| !well_rows.contains(i)));
        }
    }
}

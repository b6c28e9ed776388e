//! Public-API round trips: Matrix Market files, GMRES, AMG and MGR together.

use mgrkit_core::amg::{AmgConfig, AmgHierarchy};
use mgrkit_core::krylov::Identity;
use mgrkit_core::mgr::{CoarseSolverSpec, DofPartition, InterpKind, MgrHierarchy, MgrLevelSpec, MgrStrategy, RestrictKind};
use mgrkit_core::relax::SmootherSpec;
use mgrkit_core::sparse::{mm_read, mm_read_vector, mm_write, mm_write_vector};
use mgrkit_core::{gmres, KrylovConfig, SparseMatrix};
use proptest::prelude::*;

fn triplets() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
    (1usize..30).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n, -1e3f64..1e3), 0..4 * n)))
}

/// Diagonally dominant two-field system: a Laplacian-like `u` block coupled
/// to a `p` block.
fn coupled(n: usize) -> (SparseMatrix, DofPartition) {
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 4.0));
        if i + 1 < n {
            t.push((i, i + 1, -1.0));
            t.push((i + 1, i, -1.0));
        }
        t.push((i, n + i, 0.5));
        t.push((n + i, i, 0.5));
        t.push((n + i, n + i, 3.0));
    }
    let labels: Vec<&str> = (0..2 * n).map(|i| if i < n { "u" } else { "p" }).collect();
    (SparseMatrix::from_triplets(2 * n, 2 * n, &t).unwrap(), DofPartition::from_labels(&labels).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn matrix_market_round_trip((n, t) in triplets()) {
        let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.mtx");
        mm_write(&path, &a).unwrap();
        prop_assert_eq!(mm_read(&path).unwrap(), a);
        let x: Vec<f64> = t.iter().map(|e| e.2).collect();
        let vpath = dir.path().join("x.mtx");
        mm_write_vector(&vpath, &x).unwrap();
        prop_assert_eq!(mm_read_vector(&vpath).unwrap(), x);
    }

    #[test]
    fn preconditioners_reach_the_same_solution(n in 4usize..60) {
        let (a, part) = coupled(n);
        let b: Vec<f64> = (0..2 * n).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let cfg = KrylovConfig::with_tol(1e-12);
        let (x0, r0) = gmres(&a, &b, &Identity(2 * n), &cfg, None).unwrap();
        let amg = AmgHierarchy::setup(&a, &AmgConfig::default()).unwrap();
        let (x1, r1) = gmres(&a, &b, &amg, &cfg, None).unwrap();
        let s = MgrStrategy::new(
            "u_first",
            vec![MgrLevelSpec::new(vec!["u"], InterpKind::Jacobi, RestrictKind::Injection)
                .with_f_relax(SmootherSpec::amg(AmgConfig::default()))],
            CoarseSolverSpec::DenseLu,
        );
        let mgr = MgrHierarchy::setup(&a, &part, &s).unwrap();
        let (x2, r2) = gmres(&a, &b, &mgr, &cfg, None).unwrap();
        prop_assert!(r0.converged && r1.converged && r2.converged);
        for i in 0..2 * n {
            prop_assert!((x0[i] - x1[i]).abs() <= 1e-9 && (x0[i] - x2[i]).abs() <= 1e-9);
        }
    }
}

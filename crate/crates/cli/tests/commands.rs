//! End-to-end runs of the `mgrkit` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mgrkit::problem::{builtin_strategy, ProblemKind};
use mgrkit_core::mgr::{CoarseSolverSpec, DofPartition, MgrStrategy};
use mgrkit_core::SparseMatrix;
use mgrkit_problems::ProblemBundle;

fn mgrkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgrkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn meta(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("meta.json")).unwrap()).unwrap()
}

#[test]
fn generate_mfd_writes_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "mfd.json", r#"{"mesh": {"dims": [4, 4, 4]}, "inner_product": "tpfa"}"#);
    let out = tmp.path().join("b");
    let o = mgrkit(&["generate", "--problem", "mfd", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["matrix.mtx", "rhs.mtx", "labels.json", "meta.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let m = meta(&out);
    let (cells, faces, fixed) = (
        m["cells"].as_u64().unwrap(),
        m["faces"].as_u64().unwrap(),
        m["fixed_pressure_faces"].as_u64().unwrap(),
    );
    assert_eq!(cells, 64);
    assert_eq!(faces, 3 * 4 * 4 * 5);
    assert_eq!(m["dofs"].as_u64().unwrap(), cells + faces - fixed);
}

#[test]
fn generation_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "mfd.json", r#"{"mesh": {"dims": [3, 3, 3], "perturbation": 0.3}}"#);
    let mut files = Vec::new();
    for (name, seed) in [("a", "4"), ("b", "4"), ("c", "5")] {
        let out = tmp.path().join(name);
        let o = mgrkit(&["generate", "--problem", "mfd", "--config", s(&cfg), "--seed", seed, "--out", s(&out)]);
        assert!(o.status.success());
        files.push(std::fs::read(out.join("matrix.mtx")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_ne!(files[0], files[2]);
}

#[test]
fn comp_labels_have_four_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "comp.json", r#"{"dims": [4, 4, 4], "wells": {"count": 2}}"#);
    let out = tmp.path().join("b");
    assert!(mgrkit(&["generate", "--problem", "comp", "--config", s(&cfg), "--out", s(&out)]).status.success());
    let labels: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("labels.json")).unwrap()).unwrap();
    assert_eq!(labels["field_order"].as_array().unwrap().len(), 4);
}

#[test]
fn invalid_config_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", r#"{"mesh": {"perturbashun": 0.1}}"#);
    let o = mgrkit(&["generate", "--problem", "mfd", "--config", s(&cfg), "--out", s(&tmp.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("perturbashun"));

    let cfg = write_config(tmp.path(), "bad2.json", r#"{"dt": -1.0}"#);
    let o = mgrkit(&["generate", "--problem", "mfd", "--config", s(&cfg), "--out", s(&tmp.path().join("y"))]);
    assert_eq!(o.status.code(), Some(2));

    let o = mgrkit(&["generate", "--problem", "nope", "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn identity_bundle_solves_in_one_iteration() {
    let tmp = tempfile::tempdir().unwrap();
    let n = 12;
    let labels: Vec<&str> = (0..n).map(|i| if i % 2 == 0 { "a" } else { "b" }).collect();
    let bundle = ProblemBundle::new(
        SparseMatrix::identity(n),
        (0..n).map(|i| i as f64 + 1.0).collect(),
        DofPartition::from_labels(&labels).unwrap(),
        serde_json::Value::Null,
    )
    .unwrap();
    let dir = tmp.path().join("id");
    bundle.write(&dir).unwrap();
    let strategy = MgrStrategy::new("trivial", vec![], CoarseSolverSpec::DenseLu);
    let sfile = write_config(tmp.path(), "trivial.json", &strategy.to_json());
    let o = mgrkit(&["solve", "--bundle", s(&dir), "--strategy", s(&sfile)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["rows"][0]["iterations"], 1);
    let x = mgrkit_core::sparse::mm_read_vector(dir.join("x.mtx")).unwrap();
    assert!(x.iter().enumerate().all(|(i, v)| (v - (i as f64 + 1.0)).abs() < 1e-14));
}

#[test]
fn mfd_solve_with_builtin_strategy() {
    let tmp = tempfile::tempdir().unwrap();
    let b = tmp.path().join("b");
    assert!(mgrkit(&["generate", "--problem", "mfd", "--out", s(&b)]).status.success());
    let out = tmp.path().join("run");
    let o = mgrkit(&["solve", "--bundle", s(&b), "--strategy", "mgr_pi", "--tol", "1e-7", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let row = &report["rows"][0];
    assert_eq!(row["converged"], true);
    assert!(row["iterations"].as_u64().unwrap() <= 30);
    assert!(row["true_residual"].as_f64().unwrap() <= 1e-6);
    assert_eq!(row["dofs"], meta(&b)["dofs"]);
    assert!(out.join("report.csv").is_file() && out.join("x.mtx").is_file());
}

#[test]
fn solve_failures_have_distinct_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "mfd.json", r#"{"mesh": {"dims": [4, 4, 4]}}"#);
    let b = tmp.path().join("b");
    assert!(mgrkit(&["generate", "--problem", "mfd", "--config", s(&cfg), "--out", s(&b)]).status.success());

    // A strategy reducing a field the bundle does not have.
    let wrong = builtin_strategy(ProblemKind::Frac, "mgr_u", &serde_json::Value::Null).unwrap();
    let sfile = write_config(tmp.path(), "wrong.json", &wrong.to_json());
    let o = mgrkit(&["solve", "--bundle", s(&b), "--strategy", s(&sfile)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`u`"));

    let o = mgrkit(&["solve", "--bundle", s(&tmp.path().join("missing")), "--strategy", "mgr_p"]);
    assert_eq!(o.status.code(), Some(2));

    let o = mgrkit(&["solve", "--bundle", s(&b), "--strategy", "mgr_p", "--tol", "1e-14", "--max-iters", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(b.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["rows"][0]["converged"], false);
}

#[test]
fn study_mfd_rows_and_growth_line() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("study");
    let args = [
        "study", "--problem", "mfd", "--sizes", "8,16", "--strategy", "mgr_p,mgr_pi", "--tol", "1e-7", "--out", s(&out),
    ];
    let o = mgrkit(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("study.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 4 + 1);
    assert!(lines[5].starts_with("# growth_factor mgr_p="));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("study.json")).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    for name in ["mgr_p", "mgr_pi"] {
        let its: Vec<u64> = rows
            .iter()
            .filter(|r| r["strategy"] == name)
            .map(|r| r["iterations"].as_u64().unwrap())
            .collect();
        let expect = *its.iter().max().unwrap() as f64 / *its.iter().min().unwrap() as f64;
        assert_eq!(report["growth"][name].as_f64().unwrap(), expect);
    }

    // Repeat run: identical apart from timing columns.
    let again = tmp.path().join("again");
    let mut args2 = args.to_vec();
    *args2.last_mut().unwrap() = s(&again);
    assert!(mgrkit(&args2).status.success());
    let strip = |p: &Path| -> Vec<String> {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| {
                let mut cols: Vec<&str> = l.split(',').collect();
                if cols.len() > 7 {
                    cols.drain(6..8);
                }
                cols.join(",")
            })
            .collect()
    };
    assert_eq!(strip(&out.join("study.csv")), strip(&again.join("study.csv")));
}

#[test]
fn study_frac_keeps_strategy_ordering() {
    let o = mgrkit(&["study", "--problem", "frac", "--sizes", "32,64", "--strategy", "mgr_u,mgr_p", "--tol", "1e-4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(stdout.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    for size in ["32x32", "64x64"] {
        let its = |name: &str| -> usize {
            rows.iter()
                .find(|r| &r[1] == size && &r[3] == name)
                .map(|r| r[5].parse().unwrap())
                .unwrap()
        };
        assert!(its("mgr_u") <= its("mgr_p"), "{size}");
    }
}

#[test]
fn study_needs_two_sizes() {
    let o = mgrkit(&["study", "--problem", "mfd", "--sizes", "4", "--strategy", "mgr_p"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_subset_and_json_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("verify.json");
    let o = mgrkit(&["verify", "--only", "1,control", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
}

#[test]
fn shipped_strategy_files_match_builtins() {
    let docs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/strategies");
    let mut count = 0;
    for entry in std::fs::read_dir(&docs).unwrap() {
        let path = entry.unwrap().path();
        let stem = path.file_stem().unwrap().to_str().unwrap().to_string();
        let (problem, name) = stem.split_once('_').unwrap();
        let kind = ProblemKind::from_name(problem).unwrap();
        let meta = serde_json::json!({ "problem": problem });
        let shipped = MgrStrategy::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(Some(shipped), builtin_strategy(kind, name, &meta), "{stem}");
        count += 1;
    }
    assert_eq!(count, 6);
}

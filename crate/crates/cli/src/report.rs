//! Solve and study reports in CSV and JSON.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub problem: String,
    pub size: String,
    pub dofs: usize,
    pub strategy: String,
    pub tol: f64,
    pub iterations: usize,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    pub converged: bool,
    /// `‖b − A x‖ / ‖b‖` recomputed after the solve.
    pub true_residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub rows: Vec<ReportRow>,
    /// Max over min iteration count per strategy.
    pub growth: BTreeMap<String, f64>,
}

impl StudyReport {
    pub fn new(rows: Vec<ReportRow>) -> Self {
        let mut by_strategy: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for r in &rows {
            let e = by_strategy.entry(r.strategy.clone()).or_insert((usize::MAX, 0));
            e.0 = e.0.min(r.iterations);
            e.1 = e.1.max(r.iterations);
        }
        let growth = by_strategy
            .into_iter()
            .map(|(s, (lo, hi))| (s, hi as f64 / lo.max(1) as f64))
            .collect();
        Self { rows, growth }
    }

    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }

    /// One row per `(size, strategy)` with a `growth_factor` column, followed
    /// by a `# growth_factor` summary line.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "problem",
            "size",
            "dofs",
            "strategy",
            "tol",
            "iterations",
            "setup_seconds",
            "solve_seconds",
            "converged",
            "true_residual",
            "growth_factor",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.problem.clone(),
                r.size.clone(),
                r.dofs.to_string(),
                r.strategy.clone(),
                format!("{:e}", r.tol),
                r.iterations.to_string(),
                format!("{:.6}", r.setup_seconds),
                format!("{:.6}", r.solve_seconds),
                r.converged.to_string(),
                format!("{:e}", r.true_residual),
                format!("{:.3}", self.growth[&r.strategy]),
            ])?;
        }
        w.flush()?;
        let mut out = w.into_inner().map_err(|e| e.into_error())?;
        let summary: Vec<String> = self.growth.iter().map(|(s, g)| format!("{s}={g:.3}")).collect();
        writeln!(out, "# growth_factor {}", summary.join(" "))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join(format!("{stem}.csv")))?)?;
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

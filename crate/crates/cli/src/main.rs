use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use mgrkit::problem::{ProblemConfig, ProblemKind};
use mgrkit::run::{cmd_generate, cmd_solve, cmd_study, SolveOptions};
use mgrkit::{CliError, Result};

#[derive(Parser)]
#[command(name = "mgrkit", version, about = "Multigrid-reduction preconditioner experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct SolveArgs {
    /// Relative residual tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// GMRES restart length.
    #[arg(long, default_value_t = 50)]
    restart: usize,
    /// Iteration cap.
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
}

impl SolveArgs {
    fn options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.tol,
            restart: self.restart,
            max_iters: self.max_iters,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a problem bundle (matrix, rhs, labels, metadata).
    Generate {
        #[arg(long, value_enum)]
        problem: ProblemKind,
        /// JSON config; defaults are used for missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a bundle with GMRES and an MGR strategy.
    Solve {
        /// Bundle directory written by `generate`.
        #[arg(long)]
        bundle: PathBuf,
        /// Strategy JSON file or built-in name.
        #[arg(long)]
        strategy: String,
        #[command(flatten)]
        solve: SolveArgs,
        /// Output directory for x.mtx and the report; defaults to the bundle.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Iteration counts across refinements and strategies.
    Study {
        #[arg(long, value_enum)]
        problem: ProblemKind,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Cells per direction, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Strategy files or built-in names, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        strategy: Vec<String>,
        #[command(flatten)]
        solve: SolveArgs,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for study.csv and study.json; stdout only when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the oracle suite.
    Verify {
        /// Check ids to run (all when empty), comma separated.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        /// Write outcomes as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(problem: ProblemKind, config: Option<&PathBuf>, seed: Option<u64>) -> Result<ProblemConfig> {
    let cfg = ProblemConfig::load(problem, config.map(|p| p.as_path()))?;
    Ok(match seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            problem,
            config,
            seed,
            out,
        } => {
            let bundle = cmd_generate(&load(problem, config.as_ref(), seed)?, &out)?;
            println!("{}: {} dofs, {} nonzeros -> {}", problem.name(), bundle.dim(), bundle.matrix.nnz(), out.display());
        }
        Command::Solve {
            bundle,
            strategy,
            solve,
            out,
        } => {
            let out = out.unwrap_or_else(|| bundle.clone());
            let row = cmd_solve(&bundle, &strategy, &solve.options(), &out)?;
            println!(
                "{} {} dofs {} strategy {}: {} iterations, converged {}, true residual {:.3e}",
                row.problem, row.size, row.dofs, row.strategy, row.iterations, row.converged, row.true_residual
            );
            if !row.converged {
                return Err(CliError::NotConverged(format!("{} iterations", row.iterations)));
            }
        }
        Command::Study {
            problem,
            config,
            sizes,
            strategy,
            solve,
            seed,
            out,
        } => {
            let base = load(problem, config.as_ref(), seed)?;
            let report = cmd_study(&base, &sizes, &strategy, &solve.options())?;
            print!("{}", report.to_csv_string()?);
            if let Some(dir) = out {
                report.save(&dir, "study")?;
            }
            if !report.all_converged() {
                return Err(CliError::NotConverged("at least one study run".into()));
            }
        }
        Command::Verify { only, out } => {
            let t = Instant::now();
            let outcomes = mgrkit::verify::run_all(&only, |o| println!("{o}"));
            let secs = t.elapsed().as_secs_f64();
            let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
            println!("{} checks, {} failed, {secs:.1}s", outcomes.len(), failed.len());
            if let Some(path) = out {
                std::fs::write(path, serde_json::to_string_pretty(&outcomes)?)?;
            }
            if !failed.is_empty() {
                return Err(CliError::VerifyFailed(failed.join(", ")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

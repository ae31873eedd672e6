use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use csep::runner::{write_summary_file, write_trace_file};
use csep::{compare, load_problem, reference_solution, run, Algorithm, HarnessError, RunSpec, Summary};
use csep_core::{validate, Rule};

#[derive(Parser)]
#[command(name = "csep", version, about = "Hybrid solvers for common solutions of equilibrium problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Strict,
    Relaxed,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Parallel,
    Maxsel,
    Single,
    Sequential,
    Extragradient,
    Armijo,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Parallel => Algorithm::Parallel,
            AlgorithmArg::Maxsel => Algorithm::Maxsel,
            AlgorithmArg::Single => Algorithm::Single,
            AlgorithmArg::Sequential => Algorithm::Sequential,
            AlgorithmArg::Extragradient => Algorithm::Extragradient,
            AlgorithmArg::Armijo => Algorithm::Armijo,
        }
    }
}

#[derive(clap::Args)]
struct Params {
    /// Prox step; defaults to 0.8 of the largest admissible value.
    #[arg(long)]
    lambda: Option<f64>,
    /// Correction weight; defaults to 1.2 times the smallest admissible value.
    #[arg(long)]
    k: Option<f64>,
    /// Linesearch ratio for the Armijo baseline.
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_outer: usize,
    #[arg(long, value_enum, default_value_t = RuleArg::Strict)]
    rule: RuleArg,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random probes per prox certificate (0 disables).
    #[arg(long, default_value_t = 0)]
    certify_probes: usize,
}

impl Params {
    fn spec(&self, algorithm: Algorithm) -> RunSpec {
        RunSpec {
            algorithm,
            lambda: self.lambda,
            k: self.k,
            eta: self.eta,
            tol: self.tol,
            max_outer: self.max_outer,
            rule: match self.rule {
                RuleArg::Strict => Rule::Strict,
                RuleArg::Relaxed => Rule::Relaxed,
            },
            workers: self.workers,
            seed: self.seed,
            certify_probes: self.certify_probes,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm.
    Solve {
        problem: PathBuf,
        #[arg(long, value_enum)]
        algorithm: AlgorithmArg,
        #[command(flatten)]
        params: Params,
        /// Per-iteration CSV trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// JSON summary; printed to stdout when absent.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Print the reference projection of x0 onto the solution set.
    Oracle { problem: PathBuf },
    /// Run several algorithms on one problem and tabulate their cost.
    Compare {
        problem: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', required = true)]
        algorithms: Vec<AlgorithmArg>,
        #[command(flatten)]
        params: Params,
        /// JSON report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Spot-check the standing assumptions on sampled points.
    Validate {
        problem: PathBuf,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn fail(e: &HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable")
}

fn execute(command: Command) -> Result<ExitCode, HarnessError> {
    match command {
        Command::Solve {
            problem,
            algorithm,
            params,
            trace,
            summary,
        } => {
            let problem = load_problem(&problem)?;
            let report = run(&problem, &params.spec(algorithm.into()))?;
            if let Some(path) = &trace {
                write_trace_file(&report.outcome, path)?;
            }
            match &summary {
                Some(path) => write_summary_file(&report, path)?,
                None => println!("{}", json(&Summary::from(&report))),
            }
            eprintln!(
                "{}: {} after {} iterations",
                report.algorithm,
                csep::runner::stop_name(report.outcome.stop_reason),
                report.outcome.iterations
            );
            Ok(ExitCode::from(report.exit_code() as u8))
        }
        Command::Oracle { problem } => {
            let problem = load_problem(&problem)?;
            let point = reference_solution(&problem.instance)?;
            let source = if problem.instance.known_solution().is_some() {
                "declared"
            } else {
                "grid"
            };
            println!(
                "{}",
                json(&serde_json::json!({ "point": point.as_slice(), "source": source }))
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare {
            problem,
            algorithms,
            params,
            report,
        } => {
            let problem = load_problem(&problem)?;
            let specs: Vec<RunSpec> = algorithms
                .into_iter()
                .map(|a| params.spec(a.into()))
                .collect();
            let (table, _) = compare(&problem, &specs)?;
            print!("{}", table.table());
            if let Some(path) = &report {
                std::fs::write(path, json(&table))
                    .map_err(|e| HarnessError::Output(format!("{}: {e}", path.display())))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate {
            problem,
            samples,
            seed,
        } => {
            let problem = load_problem(&problem)?;
            let report = validate(&problem.instance, samples, seed);
            for b in &report.bifunctions {
                println!(
                    "bifunction {}: diagonal {:.2e}, convexity {}, pseudomonotonicity {}, lipschitz-type {}, subgradient gap {}",
                    b.index,
                    b.max_diagonal,
                    b.convexity_violations,
                    b.pseudomonotonicity_violations,
                    b.lipschitz_type_violations,
                    b.subgradient_discrepancy
                        .map_or_else(|| String::from("-"), |d| format!("{d:.2e}")),
                );
                for w in &b.warnings {
                    println!("  warning: {w}");
                }
            }
            for n in &report.notes {
                println!("note: {n}");
            }
            Ok(if report.is_clean() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => fail(&e),
    }
}

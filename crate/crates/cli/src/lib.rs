//! Command-line front end for the `lcqp` solver.
//!
//! ```text
//! lcqp solve <file> [--x0 1,2] [--rho0 1] [--out report.json]
//! lcqp check <file>
//! lcqp bench ivocp --N 25,50,100 --runs 100 --seed 7 --out bench.csv
//! lcqp emit ivocp --N 50 --out ivocp.json
//! ```

pub mod bench;
mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lcqp::problem::{load_problem_file, save_problem_file};
use lcqp::solver::{solve, InitMode, SolverOptions, SolverStatus};
use lcqp::transcription::{build_ivocp, IvocpConfig, DEFAULT_REGULARIZATION};
use lcqp::Error;
use nalgebra::DVector;

pub use bench::{run_benchmark, BenchConfig, RunRecord, Summary, CSV_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_LIMIT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

pub fn exit_code(status: SolverStatus) -> i32 {
    match status {
        SolverStatus::StationaryPoint => EXIT_OK,
        SolverStatus::PenaltyLimit | SolverStatus::IterationLimit => EXIT_LIMIT,
        SolverStatus::Infeasible => EXIT_INFEASIBLE,
    }
}

#[derive(Debug, Parser)]
#[command(name = "lcqp", version, about = "Solve QPs with linear complementarity constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a problem file and write a JSON report.
    Solve(SolveArgs),
    /// Compare the solver against the branch-enumeration oracle.
    Check(SolveArgs),
    /// Run a benchmark and write one CSV row per run.
    Bench {
        #[command(subcommand)]
        target: BenchTarget,
    },
    /// Write a generated instance as a problem file.
    Emit {
        #[command(subcommand)]
        target: EmitTarget,
    },
}

#[derive(Debug, Subcommand)]
enum BenchTarget {
    /// Switched-system optimal control problem over several grid sizes.
    Ivocp(BenchArgs),
}

#[derive(Debug, Subcommand)]
enum EmitTarget {
    Ivocp(EmitArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InitArg {
    Qp0,
    Given,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct SolverFlags {
    #[arg(long)]
    rho0: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long = "tol-stat")]
    tol_stat: Option<f64>,
    #[arg(long = "tol-comp")]
    tol_comp: Option<f64>,
    #[arg(long = "rho-max")]
    rho_max: Option<f64>,
    #[arg(long = "max-inner")]
    max_inner: Option<usize>,
    #[arg(long, value_enum)]
    init: Option<InitArg>,
}

impl SolverFlags {
    fn options(&self) -> anyhow::Result<SolverOptions> {
        let d = SolverOptions::default();
        let options = SolverOptions {
            rho0: self.rho0.unwrap_or(d.rho0),
            beta: self.beta.unwrap_or(d.beta),
            tol_stationarity: self.tol_stat.unwrap_or(d.tol_stationarity),
            tol_complementarity: self.tol_comp.unwrap_or(d.tol_complementarity),
            rho_max: self.rho_max.unwrap_or(d.rho_max),
            max_inner: self.max_inner.unwrap_or(d.max_inner),
            init_mode: self.init.map(|i| match i {
                InitArg::Qp0 => InitMode::ZeroPenaltyQp,
                InitArg::Given => InitMode::GivenX0,
            }),
            activity_tol: d.activity_tol,
        };
        options.validate()?;
        Ok(options)
    }
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct SolveArgs {
    path: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
    /// Initial guess, overrides the one in the file.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    /// Report path; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct BenchArgs {
    #[arg(long = "N", value_delimiter = ',', default_values_t = vec![25, 50, 100])]
    n: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV path; stdout if omitted, with the aggregate table on stderr.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every hardware thread.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, default_value_t = DEFAULT_REGULARIZATION)]
    eps: f64,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct EmitArgs {
    #[arg(long = "N")]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_REGULARIZATION)]
    eps: f64,
    /// Store the forward simulation from this initial state as `x0`.
    #[arg(long)]
    guess: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

/// Honor `LCQP_LOG` (`off`, `info`, `trace`, ...). Defaults to `off`.
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("LCQP_LOG", "off");
    let _ = env_logger::Builder::from_env(env).try_init();
}

/// Parse `args` (including the program name) and run the command. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    return EXIT_OK;
                }
                _ => EXIT_USAGE,
            };
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(&args, out),
        Command::Check(args) => cmd_check(&args, out),
        Command::Bench {
            target: BenchTarget::Ivocp(args),
        } => cmd_bench(&args, out, err),
        Command::Emit {
            target: EmitTarget::Ivocp(args),
        } => cmd_emit(&args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_USAGE
        }
    }
}

fn load_with_guess(args: &SolveArgs) -> anyhow::Result<(lcqp::LcqpProblem, Option<DVector<f64>>)> {
    let file = load_problem_file(&args.path)?;
    let x0 = match &args.x0 {
        Some(v) => {
            if v.len() != file.problem.n() {
                bail!("--x0 has {} entries, problem has n = {}", v.len(), file.problem.n());
            }
            Some(DVector::from_column_slice(v))
        }
        None => file.x0,
    };
    Ok((file.problem, x0))
}

fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => writeln!(out, "{text}").context("writing report"),
    }
}

fn cmd_solve(args: &SolveArgs, out: &mut dyn Write) -> anyhow::Result<i32> {
    let options = args.solver.options()?;
    let (problem, x0) = load_with_guess(args)?;
    let result = solve(&problem, &options, x0.as_ref())?;
    let json = report::solve_report(&problem, &result);
    emit(&serde_json::to_string_pretty(&json)?, args.out.as_deref(), out)?;
    Ok(exit_code(result.status))
}

fn cmd_check(args: &SolveArgs, out: &mut dyn Write) -> anyhow::Result<i32> {
    let options = args.solver.options()?;
    let (problem, x0) = load_with_guess(args)?;
    let oracle = lcqp::oracle::global_solve_by_enumeration(&problem)?;
    let result = solve(&problem, &options, x0.as_ref())?;
    let gap = if result.status == SolverStatus::Infeasible {
        None
    } else {
        Some(lcqp::oracle::branch_stationarity_gap(&problem, &result.x, options.activity_tol)?)
    };
    let json = report::check_report(&result, &oracle, gap);
    emit(&serde_json::to_string_pretty(&json)?, args.out.as_deref(), out)?;
    Ok(exit_code(result.status))
}

fn cmd_bench(args: &BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<i32> {
    if args.n.is_empty() || args.runs == 0 {
        return Err(Error::InvalidOption {
            name: "N/runs".into(),
            reason: "need at least one grid size and one run".into(),
        }
        .into());
    }
    let config = BenchConfig {
        n_steps: args.n.clone(),
        runs: args.runs,
        seed: args.seed,
        jobs: args.jobs,
        regularization_eps: args.eps,
        options: args.solver.options()?,
    };
    let records = run_benchmark(&config)?;
    let summary = Summary::from_records(&records);
    match &args.out {
        Some(path) => {
            let file = std::fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))?;
            bench::write_csv(&records, file).with_context(|| format!("writing {}", path.display()))?;
            summary.write_table(out)?;
        }
        None => {
            bench::write_csv(&records, &mut *out)?;
            summary.write_table(err)?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_emit(args: &EmitArgs) -> anyhow::Result<i32> {
    let config = IvocpConfig {
        regularization_eps: args.eps,
        ..IvocpConfig::new(args.n)
    };
    let inst = build_ivocp(config)?;
    let x0 = args.guess.map(|g| inst.forward_simulation(g));
    save_problem_file(&inst.problem, x0.as_ref(), &args.out)?;
    Ok(EXIT_OK)
}

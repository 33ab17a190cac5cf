//! `maxreg`: batch front-end for analyses, solves, estimate checks and
//! convergence comparisons of non-autonomous parabolic problems.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "maxreg", version, about = "Maximal-regularity solvers and estimate checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Common {
    /// problem description (JSON)
    #[arg(long)]
    problem: PathBuf,
    /// output directory (created if missing)
    #[arg(long)]
    out: PathBuf,
    /// seed for probes and trial data
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = BackendArg::Eigen)]
    backend: BackendArg,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Seminorms, subdivision breakpoints and hypothesis constants
    Analyze {
        #[command(flatten)]
        common: Common,
        /// comma-separated regularity exponents in (0, 1)
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75")]
        alpha: Vec<f64>,
        /// subdivision threshold
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
    },
    /// Solve and write the trajectory, norms and diagnostics
    Solve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverArgs,
        /// initial value: zero, one, sine or mode:<k>
        #[arg(long, default_value = "sine")]
        u0: String,
        /// forcing: zero, a vector spec, or <spec>*cos
        #[arg(long, default_value = "zero")]
        f: String,
    },
    /// Evaluate estimate suites and write one row per report
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
    },
    /// Discrepancy against a fine Crank–Nicolson reference over a Δt sweep
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverArgs,
        /// comma-separated steps; fractions like 1/32 are accepted
        #[arg(long, value_delimiter = ',', default_value = "1/16,1/32,1/64", value_parser = parse_step)]
        dt_sweep: Vec<f64>,
        #[arg(long, default_value = "sine")]
        u0: String,
        #[arg(long, default_value = "zero")]
        f: String,
    },
}

#[derive(Args, Debug, Clone, Serialize)]
struct SolverArgs {
    #[arg(long, value_parser = parse_step)]
    dt: Option<f64>,
    /// subdivision threshold of the fixed-point solver
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    /// defaults to gamma0 for lower-order problems and neumann otherwise
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MethodArg {
    Neumann,
    Gamma0,
    /// Crank–Nicolson
    Reference,
    BackwardEuler,
    CrankNicolson,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum BackendArg {
    Eigen,
    Contour,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Suite {
    All,
    Kato,
    Quadratic,
    Resolvent,
    Apriori,
    Lbound,
}

fn parse_step(s: &str) -> Result<f64, String> {
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| format!("{s}: {e}"))?;
            let b: f64 = b.trim().parse().map_err(|e| format!("{s}: {e}"))?;
            a / b
        }
        None => s.trim().parse().map_err(|e| format!("{s}: {e}"))?,
    };
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s}: step must be positive"))
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("MAXREG_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| commands::Failure::Input(format!("MAXREG_THREADS={v:?} is not a thread count")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads().and_then(|_| commands::run(cli.command));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}

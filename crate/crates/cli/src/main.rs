//! `sharpmax`: solve γ, certify the special function, simulate subordinate
//! pairs and build sharpness witnesses.
//!
//! Exit codes: 0 when every check passes, 1 when a mathematical check
//! fails, 2 for usage or resource errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::ConfigFile;

#[derive(Debug, Parser)]
#[command(
    name = "sharpmax",
    version,
    about = "Sharp maximal inequalities: solver, verifier, simulator"
)]
pub struct Cli {
    /// File of `key=value` lines giving defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "SHARPMAX_WORKERS")]
    pub workers: Option<usize>,
    /// Write the main output (CSV or JSON lines) here; the run summary then
    /// goes to stdout instead of stderr.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Exponent p (a comma-separated list for `verify`).
    #[arg(long, global = true)]
    pub p: Option<String>,
    /// Subordination strength alpha (a comma-separated list for `verify`).
    #[arg(long, global = true)]
    pub alpha: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for γ and write the solution document (or a table with --step).
    Gamma(GammaArgs),
    /// Run the certification suite over a (p, alpha) grid.
    Verify(VerifyArgs),
    /// Monte Carlo moments of a subordinate pair.
    Simulate(SimulateArgs),
    /// Discretized stochastic integral against a reflected random walk.
    Ito(ItoArgs),
    /// Ratios of the extremal trees over a sweep of delta.
    Sharpness(SharpnessArgs),
    /// CSV rows (x, γ, γ') of the γ curve.
    Figure1(Figure1Args),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Right end of the solved range.
    #[arg(long)]
    pub x_max: Option<f64>,
    /// Residual tolerance the solution must meet.
    #[arg(long)]
    pub tol_ode: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GammaArgs {
    #[command(flatten)]
    pub solve: SolveArgs,
    /// Emit a CSV table with this spacing instead of the JSON document.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub from: Option<f64>,
    #[arg(long)]
    pub to: Option<f64>,
}

#[derive(Debug, Args)]
pub struct Figure1Args {
    #[command(flatten)]
    pub solve: SolveArgs,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub from: Option<f64>,
    #[arg(long)]
    pub to: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub solve: SolveArgs,
    /// Approximate number of normalized grid points.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Random lines, tangent tuples and gradient samples per check.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Replace every check tolerance by this value.
    #[arg(long)]
    pub tol_check: Option<f64>,
    /// Perturb γ before checking (exercises the failure path).
    #[arg(long, hide = true)]
    pub corrupt_gamma: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub paths: Option<usize>,
    /// Steps per path.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Sample paths of this JSON tree instead of a random walk, and compare
    /// with its exact moments.
    #[arg(long)]
    pub tree: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IntegrandKind {
    Alternating,
    Constant,
    Random,
}

#[derive(Debug, Args)]
pub struct ItoArgs {
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Time horizon T; dt = T / steps.
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long, value_enum)]
    pub integrand: Option<IntegrandKind>,
    /// Also run with dt halved and report the relative change of the ratio.
    #[arg(long)]
    pub halve: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepMode {
    Martingale,
    Submartingale,
}

#[derive(Debug, Args)]
pub struct SharpnessArgs {
    #[arg(long, value_enum)]
    pub mode: Option<SweepMode>,
    /// Comma-separated delta values.
    #[arg(long)]
    pub delta: Option<String>,
    /// Comma-separated round counts, one per delta or a single shared value;
    /// defaults to ceil(horizon / delta).
    #[arg(long)]
    pub rounds: Option<String>,
    #[arg(long)]
    pub horizon: Option<f64>,
}

pub enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(path) => match ConfigFile::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
        },
        None => ConfigFile::default(),
    };
    match commands::run(&cli, &config) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

//! Scenario-driven command line front end for the off-network pricing
//! game solvers.

mod csvout;
mod manifest;
mod run;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use run::{Overrides, Verb};

#[derive(Parser)]
#[command(
    name = "offnet",
    version,
    about = "Regulated ISP/CP pricing games: equilibrium solvers, price dynamics, collusion metrics, and a brute-force verifier"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the scenario's equilibrium regime into results.csv
    Solve(RunArgs),
    /// Run discrete best-response dynamics or the projected flow
    Dynamics(RunArgs),
    /// Solve the exclusive-contract game or compute its metrics
    Collude(RunArgs),
    /// Compare the two regulation timings for a single-CP market
    Compare(RunArgs),
    /// Check solver output against the grid best-response oracle
    Verify(RunArgs),
    /// Sweep one parameter, one CSV row per sample
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (JSON, one scenario per file)
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for CSV data and the run manifest
    /// (default: the scenario's out_dir, else ./out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the grid resolution (points per axis)
    #[arg(long)]
    grid: Option<usize>,
    /// Override the numeric tolerance
    #[arg(long)]
    tol: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (verb, args) = match cli.command {
        Command::Solve(args) => (Verb::Solve, args),
        Command::Dynamics(args) => (Verb::Dynamics, args),
        Command::Collude(args) => (Verb::Collude, args),
        Command::Compare(args) => (Verb::Compare, args),
        Command::Verify(args) => (Verb::Verify, args),
        Command::Sweep(args) => (Verb::Sweep, args),
    };
    let overrides = Overrides {
        grid: args.grid,
        tol: args.tol,
    };
    match run::execute(verb, &args.scenario, args.out.as_deref(), &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

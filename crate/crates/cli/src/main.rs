//! `dsii`: run Davey-Stewartson II evolutions, convergence sweeps, theta-function
//! solutions and oracle checks from the command line.
//!
//! Exit codes: 0 success, 1 error, 2 usage, 3 blow-up (partial output written),
//! 4 a check did not pass.

mod commands;
mod selftest;
mod settings;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Outcome;

#[derive(Parser, Debug)]
#[command(
    name = "dsii",
    version,
    about = "Pseudospectral Davey-Stewartson II solver"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evolve one initial field and write a run directory.
    Evolve(settings::EvolveArgs),
    /// Self-convergence study over a list of grids.
    Sweep(settings::SweepArgs),
    /// Sample a theta-function solution on a grid.
    ThetaEval(commands::ThetaEvalArgs),
    /// Evaluate the period conditions of theta-function surface data.
    ThetaCheck(commands::ThetaCheckArgs),
    /// Compare a y-independent run against the 1D cubic NLS solver.
    #[command(name = "oracle-1d")]
    Oracle1d(commands::Oracle1dArgs),
    /// Run the quick invariant checks.
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Evolve(a) => commands::evolve_cmd(a),
        Command::Sweep(a) => commands::sweep_cmd(a),
        Command::ThetaEval(a) => commands::theta_eval_cmd(a),
        Command::ThetaCheck(a) => commands::theta_check_cmd(a),
        Command::Oracle1d(a) => commands::oracle_1d_cmd(a),
        Command::Selftest => selftest::run().map(|ok| {
            if ok {
                Outcome::Ok
            } else {
                Outcome::CheckFailed
            }
        }),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::BlowUp) => ExitCode::from(3),
        Ok(Outcome::CheckFailed) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

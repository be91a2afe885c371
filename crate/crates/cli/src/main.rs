//! `lockmodel`: predict and simulate transaction response times under
//! encounter-time two-phase locking with abort on conflict.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::RunArgs;

#[derive(Parser)]
#[command(
    name = "lockmodel",
    version,
    about = "Lock-contention model and simulator for abort-and-restart transactions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the analytical model and write solution.csv / solution.json
    Solve(RunArgs),
    /// Run the discrete-event simulator and write sim.csv / sim.json
    Simulate(RunArgs),
    /// Solve and simulate the same workload, writing compare.csv
    Compare(RunArgs),
    /// Evaluate the model across a swept parameter, writing sweep.csv
    Sweep(RunArgs),
    /// Parse a configuration and print its canonical JSON form
    Echo(EchoArgs),
}

#[derive(Args)]
struct EchoArgs {
    /// Path to the JSON run configuration
    #[arg(long)]
    config: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(args) => commands::cmd_solve(&args),
        Command::Simulate(args) => commands::cmd_simulate(&args),
        Command::Compare(args) => commands::cmd_compare(&args),
        Command::Sweep(args) => commands::cmd_sweep(&args),
        Command::Echo(args) => commands::cmd_echo(&args.config),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

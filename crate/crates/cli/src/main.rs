//! `trikit` — qutrit gate synthesis, pulse simulation, and tomography.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod manifest;
mod matrixio;
mod profile;
mod runerr;

use runerr::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "trikit", version, about = "Qutrit gate synthesis and pulse simulation toolkit")]
struct Cli {
    /// Device profile TOML (defaults to the built-in flux-qutrit profile).
    #[arg(long, global = true)]
    profile: Option<PathBuf>,

    /// Seed for every stochastic step (noise draws, solver restarts).
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,

    /// Worker threads (also honours the TRIKIT_WORKERS environment variable).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factor a target gate into a diagonal and an off-diagonal-generator unitary.
    Decompose(commands::decompose::Args),
    /// Report drive-induced level shifts (perturbative vs dressed-state).
    Shifts(commands::shifts::Args),
    /// Integrate the master equation for a synthesized pulse schedule.
    Simulate(commands::simulate::Args),
    /// Reconstruct states or processes from measurement records.
    Tomo(commands::tomo::Args),
}

fn worker_count(flag: Option<usize>) -> CliResult<usize> {
    if let Some(n) = flag {
        if n == 0 {
            return Err(CliError::input("--workers must be at least 1"));
        }
        return Ok(n);
    }
    match std::env::var("TRIKIT_WORKERS") {
        Ok(s) => {
            let n: usize = s
                .parse()
                .map_err(|_| CliError::input(format!("TRIKIT_WORKERS: bad count `{s}`")))?;
            if n == 0 {
                return Err(CliError::input("TRIKIT_WORKERS must be at least 1"));
            }
            Ok(n)
        }
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let workers = worker_count(cli.workers)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .ok(); // a later invocation in-process may already have a pool

    let loaded = profile::load(cli.profile.as_deref())?;
    let ctx = commands::Context { profile: loaded, seed: cli.seed };

    match cli.command {
        Command::Decompose(args) => commands::decompose::run(&ctx, args),
        Command::Shifts(args) => commands::shifts::run(&ctx, args),
        Command::Simulate(args) => commands::simulate::run(&ctx, args),
        Command::Tomo(args) => commands::tomo::run(&ctx, args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use magflow_core::Error;

mod commands;
mod config;

use config::{Flags, RunConfig};

#[derive(Parser)]
#[command(name = "magflow", version, about = "Magnetic geodesic flow on hyperbolic surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Exact and integrated trajectory from the reference state, with a regime summary.
    Flow,
    /// Density of the projected torus on a disk grid, over the cover or the Bolza surface.
    Density,
    /// Landau ladder for one value of k.
    Spectrum,
    /// Monte Carlo histogram of the projected torus measure against the closed form.
    Sample,
    /// Time averages along critical-energy trajectories on the Bolza surface.
    Equidist,
    /// Run the acceptance checks.
    Verify,
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Runtime(String),
    Verification(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_)
            | Error::InvalidArgument(_)
            | Error::TorusUndefined
            | Error::NoPeriod
            | Error::ChernConstraint(_)
            | Error::NotCritical
            | Error::AboveLadder { .. }
            | Error::ConfigMismatch
            | Error::ResolutionTooCoarse(_)
            | Error::Parse(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("MAGFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Config(format!("MAGFLOW_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    init_threads()?;
    let rc = RunConfig::resolve(&cli.flags)?;
    std::fs::create_dir_all(&rc.out)?;
    match cli.command {
        Command::Flow => commands::flow(&rc),
        Command::Density => commands::density(&rc),
        Command::Spectrum => commands::spectrum(&rc),
        Command::Sample => commands::sample(&rc),
        Command::Equidist => commands::equidist(&rc),
        Command::Verify => commands::verify(&rc),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("magflow: configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Verification(n)) => {
            eprintln!("magflow: {n} verification criteria failed");
            ExitCode::from(3)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("magflow: {msg}");
            ExitCode::from(1)
        }
    }
}

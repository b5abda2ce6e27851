use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, ValueEnum};
use log::info;
use qlbe::cli_io::{exit_code_for, run_subcommand, RunOptions, Subcommand, EXIT_CONFIG};
use qlbe::config::apply_env_overrides;
use qlbe::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Sfactor,
    Evolve,
    Unravel,
    Rates,
    Friction,
    ClEvolve,
    Validate,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Sfactor => Subcommand::Sfactor,
            Command::Evolve => Subcommand::Evolve,
            Command::Unravel => Subcommand::Unravel,
            Command::Rates => Subcommand::Rates,
            Command::Friction => Subcommand::Friction,
            Command::ClEvolve => Subcommand::ClEvolve,
            Command::Validate => Subcommand::Validate,
        }
    }
}

/// Quantum linear Boltzmann dynamics of a test particle in an ideal gas.
///
/// Configuration keys can be overridden with QLBE_<KEY> environment
/// variables, e.g. QLBE_PHYSICAL_BETA=2.
#[derive(Debug, Parser)]
#[command(name = "qlbe", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,

    /// JSON configuration; defaults are used for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory, overriding output.directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Random seed, overriding monte_carlo.seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Initial density matrix (row,col,re,im CSV) for `evolve`.
    #[arg(long)]
    state: Option<PathBuf>,
}

fn run(cli: &Cli) -> anyhow::Result<i32> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        None => "{}".to_string(),
    };
    let mut cfg = apply_env_overrides(&text, std::env::vars())?;
    if let Some(seed) = cli.seed {
        cfg.monte_carlo.seed = seed;
    }
    let opts = RunOptions {
        out_dir: cli.out.clone(),
        initial_state: cli.state.clone(),
    };
    let outcome = run_subcommand(cli.command.into(), &cfg, &opts)?;
    for f in &outcome.files {
        info!("wrote {}", f.display());
    }
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = match e.downcast_ref::<Error>() {
                Some(err) => exit_code_for(err),
                None => EXIT_CONFIG,
            };
            ExitCode::from(code as u8)
        }
    }
}

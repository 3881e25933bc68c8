use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rfnse_cli::{run, CliError, Command, RawConfig, RunConfig};

/// Linear solvers and experiments for the discretised fractional
/// Schrödinger equation.
#[derive(Parser)]
#[command(name = "rfnse", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Solve the second-time-level system once.
    Solve(Common),
    /// All methods over a list of sizes (`M_list` or `h_list`).
    Bench(Common),
    /// Full time evolution with mass and energy per level.
    Conserve(Common),
    /// Spectrum of a (preconditioned) operator or an eigenvalue bracket.
    Eig(Common),
    /// τ-GMRES iterations over `omegas`.
    OmegaSweep(Common),
    /// Iterations over `rhos`.
    RhoSweep(Common),
    /// Iterations over `alphas`.
    AlphaSweep(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one key, `--set alpha=1.8`. Repeatable; later wins.
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// CSV destination, stdout when absent or `-`.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::Solve(c) => (Command::Solve, c),
        Sub::Bench(c) => (Command::Bench, c),
        Sub::Conserve(c) => (Command::Conserve, c),
        Sub::Eig(c) => (Command::Eig, c),
        Sub::OmegaSweep(c) => (Command::OmegaSweep, c),
        Sub::RhoSweep(c) => (Command::RhoSweep, c),
        Sub::AlphaSweep(c) => (Command::AlphaSweep, c),
    };
    match execute(command, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rfnse {}: {e}", command.name());
            ExitCode::from(e.exit_code())
        }
    }
}

fn execute(command: Command, common: Common) -> Result<(), CliError> {
    let mut raw = match &common.config {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::default(),
    };
    let mut sets = common.set;
    if let Some(o) = common.out {
        sets.push(format!("out={}", o.display()));
    }
    raw.apply_overrides(&sets)?;
    let cfg = RunConfig::from_raw(raw)?;
    run(command, &cfg)
}

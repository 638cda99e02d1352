mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{Map, Value};

use crate::config::{
    EstimateArgs, MeanfieldArgs, PathsArgs, ScalingArgs, SelfdualArgs, SimulateArgs, SweepArgs,
    WalksArgs, ZetaArgs,
};
use crate::error::CliError;

/// Contact-process experiments on random oriented percolation graphs.
#[derive(Debug, Parser)]
#[command(name = "cpsim", version)]
struct Cli {
    /// JSON file of subcommand parameters. Flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file. Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for replica parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Root of every derived seed.
    #[arg(long, global = true)]
    master_seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One run of the contact process on a fixed environment.
    Simulate(SimulateArgs),
    /// Annealed mean of the binary contact path process at the origin.
    Zeta(ZetaArgs),
    /// Open oriented paths to the origin, and the infection-path moment bound.
    Paths(PathsArgs),
    /// Meeting statistics of two independent oriented walks.
    Walks(WalksArgs),
    /// Mean-field occupation curve.
    Meanfield(MeanfieldArgs),
    /// Both sides of the annealed self-duality identity.
    Selfdual(SelfdualArgs),
    /// Bisection for the critical infection rate.
    Estimate(EstimateArgs),
    /// Survival probability over a grid of infection rates.
    Sweep(SweepArgs),
    /// Critical-rate estimates and bounds across dimensions.
    Scaling(ScalingArgs),
}

/// What every subcommand needs besides its own parameters.
pub struct Context {
    pub master_seed: u64,
    pub config: Map<String, Value>,
    pub out: Option<PathBuf>,
}

fn read_config(path: Option<&PathBuf>) -> Result<Map<String, Value>, CliError> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::Config("config must be a JSON object".into())),
        Err(e) => Err(CliError::Config(format!("malformed config: {e}"))),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot size the worker pool: {e}")))?;
    }
    let config = read_config(cli.config.as_ref())?;
    let config_seed = match config.get("master_seed") {
        None => None,
        Some(v) => Some(
            v.as_u64()
                .ok_or_else(|| CliError::Config("master_seed must be a 64-bit unsigned integer".into()))?,
        ),
    };
    let ctx = Context {
        master_seed: cli.master_seed.or(config_seed).unwrap_or(0),
        config,
        out: cli.out,
    };
    match cli.command {
        Command::Simulate(a) => commands::simulate(a, &ctx),
        Command::Zeta(a) => commands::zeta(a, &ctx),
        Command::Paths(a) => commands::paths(a, &ctx),
        Command::Walks(a) => commands::walks(a, &ctx),
        Command::Meanfield(a) => commands::meanfield(a, &ctx),
        Command::Selfdual(a) => commands::selfdual(a, &ctx),
        Command::Estimate(a) => commands::estimate(a, &ctx),
        Command::Sweep(a) => commands::sweep(a, &ctx),
        Command::Scaling(a) => commands::scaling(a, &ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let err = CliError::Usage(e.kind().to_string());
            eprintln!("{}", err.record());
            return ExitCode::from(err.exit_code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            eprintln!("{}", err.record());
            ExitCode::from(err.exit_code())
        }
    }
}

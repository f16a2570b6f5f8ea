//! `asbound`: error-floor estimates, simulation and comparison from a TOML run
//! configuration.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Context;
use crate::config::{CodeSource, RunConfig};

#[derive(Parser)]
#[command(
    name = "asbound",
    version,
    about = "Absorbing-set error-floor estimates for quantized LDPC decoders"
)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Failure set and N·λ̂ curve for the configured absorbing set.
    Bound,
    /// Monte-Carlo FER of the configured code.
    Simulate,
    /// Aligns a bound CSV with a simulation CSV.
    Compare {
        #[arg(long)]
        bound: Option<PathBuf>,
        #[arg(long)]
        sim: Option<PathBuf>,
    },
    /// Writes a parity-check matrix as alist.
    Codegen {
        /// `array:γ:p`, `alist:path`, `tanner-155`, `eg-63` or `regular-random:n:dv:dc:seed`.
        #[arg(long)]
        code: Option<CodeSource>,
    },
    /// Classifies an absorbing-set file.
    ValidateAs { file: Option<PathBuf> },
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Parse(String),
    Core(asbound::Error),
    Io(std::io::Error),
}

impl From<asbound::Error> for CliError {
    fn from(e: asbound::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "I/O error: {e}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use asbound::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Core(E::Parse { .. }) => 3,
            CliError::Core(E::Guard(_)) => 4,
            CliError::Core(E::InvalidArgument(_) | E::Quantizer(_) | E::Dimension(_) | E::Graph(_)) => 2,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = cli.config.as_deref().map(RunConfig::load).transpose()?;
    if let Some(n) = cli.threads.or_else(|| config.as_ref().and_then(|c| c.threads)) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let ctx = Context {
        config,
        seed: cli.seed,
        out: cli.out,
    };
    match &cli.command {
        Command::Bound => commands::bound(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Compare { bound, sim } => commands::compare(&ctx, bound.as_deref(), sim.as_deref()),
        Command::Codegen { code } => commands::codegen(&ctx, code.as_ref()),
        Command::ValidateAs { file } => commands::validate_as(&ctx, file.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("asbound: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

//! Command-line driver: reads a run configuration, runs one experiment and
//! writes CSV/JSON tables plus a manifest into the output directory.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Serialize;

pub use config::RunConfig;
pub use error::CliError;
use output::{sha256_hex, OutputDir, OutputFile};

#[derive(Debug, Parser)]
#[command(
    name = "qbyte",
    version,
    about = "Cross-talk simulator for gradient-addressed ion registers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overrides `benchmark.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Overrides `benchmark.trials`.
    #[arg(long, global = true)]
    pub trials: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Equilibrium positions and transition frequencies.
    Positions,
    /// Single-pulse excitation spectrum.
    Spectrum,
    /// Excitation versus pulse length with one ion addressed.
    Rabi,
    /// Randomized benchmarking of every spectator.
    Benchmark,
    /// Full cross-talk matrix.
    Xtalk,
    /// Pulse duration, Rabi frequency and bias for cross-talk suppression.
    Optimize,
    /// Error budget and its parameter scaling.
    Scaling,
    /// Closed form versus random walk versus full dynamics.
    Oracle,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Positions => "positions",
            Command::Spectrum => "spectrum",
            Command::Rabi => "rabi",
            Command::Benchmark => "benchmark",
            Command::Xtalk => "xtalk",
            Command::Optimize => "optimize",
            Command::Scaling => "scaling",
            Command::Oracle => "oracle",
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_sha256: String,
    seed: u64,
    trials: usize,
    qbyte_version: &'a str,
    cli_version: &'a str,
    outputs: &'a [OutputFile],
}

/// Reads the configuration and applies command-line overrides.
pub fn load_config(cli: &Cli) -> Result<(RunConfig, String), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = RunConfig::parse(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Some(seed) = cli.seed {
        cfg.benchmark.seed = seed;
    }
    if let Some(trials) = cli.trials {
        if trials == 0 {
            return Err(CliError::Config("--trials must be at least 1".into()));
        }
        cfg.benchmark.trials = trials;
    }
    Ok((cfg, sha256_hex(text.as_bytes())))
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let (cfg, hash) = load_config(cli)?;
    let mut out = OutputDir::create(&cli.out)?;
    let go = |out: &mut OutputDir| match cli.command {
        Command::Positions => commands::positions(&cfg, out),
        Command::Spectrum => commands::spectrum(&cfg, out),
        Command::Rabi => commands::rabi(&cfg, out),
        Command::Benchmark => commands::benchmark(&cfg, out),
        Command::Xtalk => commands::xtalk(&cfg, out),
        Command::Optimize => commands::optimize(&cfg, out),
        Command::Scaling => commands::scaling(&cfg, out),
        Command::Oracle => commands::oracle(&cfg, out),
    };
    match cli.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?
            .install(|| go(&mut out))?,
        None => go(&mut out)?,
    }
    let files = out.files().to_vec();
    out.json(
        &format!("{}_manifest.json", cli.command.name()),
        &Manifest {
            command: cli.command.name(),
            config_sha256: hash,
            seed: cfg.benchmark.seed,
            trials: cfg.benchmark.trials,
            qbyte_version: qbyte::VERSION,
            cli_version: env!("CARGO_PKG_VERSION"),
            outputs: &files,
        },
    )
}

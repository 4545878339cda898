//! `g3m`: config-driven runs of the g3m-core simulators and analytics.
//!
//! Exit codes: 0 success, 1 failed validation, 2 bad configuration or
//! input, 3 runtime error.

mod analyze;
mod config;
mod growth;
mod heatmap;
mod manifest;
mod simulate;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "g3m",
    version,
    about = "Liquidity-provider growth in geometric mean market makers"
)]
struct Cli {
    /// TOML run configuration, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "G3M_OUT", default_value = "g3m-out")]
    out: PathBuf,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "G3M_THREADS")]
    threads: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate pool paths under arbitrage.
    Simulate {
        /// One long-format CSV instead of a file per path.
        #[arg(long)]
        long: bool,
    },
    /// Long-run growth rate and growth ratio.
    Growth,
    /// Growth-ratio grid over weights and fee tiers.
    Heatmap,
    /// Run the validation suite.
    Validate {
        /// Comma-separated subset of checks.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        /// Multiplies every tolerance; values below one tighten the suite.
        #[arg(long)]
        tolerance_scale: Option<f64>,
    },
    /// Mispricing statistics of an observed pool/reference price series.
    AnalyzeCsv {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        gamma: f64,
    },
}

/// Why a command stopped.
#[derive(Debug)]
pub enum Failure {
    /// Validation ran and at least one check failed.
    Checks(String),
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Checks(_) => 1,
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

pub fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

pub fn runtime_err(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Settings shared by every command.
pub struct Context {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub format: Format,
    pub command: &'static str,
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(config_err("thread count must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(runtime_err)?;
    }
    let file = config::RunConfig::load(cli.config.as_deref())?;
    let name = match cli.command {
        Command::Simulate { .. } => "simulate",
        Command::Growth => "growth",
        Command::Heatmap => "heatmap",
        Command::Validate { .. } => "validate",
        Command::AnalyzeCsv { .. } => "analyze-csv",
    };
    let ctx = Context {
        out: cli.out,
        seed: cli.seed,
        threads: cli.threads,
        format: cli.format,
        command: name,
    };
    match cli.command {
        Command::Simulate { long } => simulate::run(
            &ctx,
            file.simulate.unwrap_or_else(config::default_experiment),
            long,
        ),
        Command::Growth => growth::run(&ctx, file.growth.unwrap_or_default()),
        Command::Heatmap => heatmap::run(&ctx, file.heatmap.unwrap_or_default()),
        Command::Validate {
            only,
            tolerance_scale,
        } => {
            let mut cfg = file.validate.unwrap_or_default();
            if let Some(s) = tolerance_scale {
                cfg.tolerance_scale = s;
            }
            if !only.is_empty() {
                cfg.only = only;
            }
            validate::run(&ctx, cfg)
        }
        Command::AnalyzeCsv { input, gamma } => analyze::run(&ctx, &input, gamma),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Checks(m) => eprintln!("validation failed: {m}"),
                Failure::Config(m) => eprintln!("configuration error: {m}"),
                Failure::Runtime(m) => eprintln!("runtime error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

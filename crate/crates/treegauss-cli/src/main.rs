//! `treegauss`: experiment harness for Gaussian random sums on rooted
//! trees. Every subcommand reads a JSON config, runs deterministically,
//! and writes CSV/JSON artifacts that embed the resolved config.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::{Ctx, Target};
use config::{ConfigError, ExperimentConfig, Overrides};

#[derive(Parser, Debug)]
#[command(name = "treegauss", version, about = "Gaussian random sums on rooted trees")]
struct Cli {
    /// JSON experiment config (required by everything except `reproduce`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the config's RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the config's replica count.
    #[arg(long, global = true)]
    replicas: Option<u64>,
    /// Override the config's truncation depths (comma-separated).
    #[arg(long = "depth", global = true, value_delimiter = ',')]
    depth: Option<Vec<u32>>,
    /// Override the radius grid: largest radius.
    #[arg(long, global = true)]
    eps_start: Option<f64>,
    /// Override the radius grid: smallest radius.
    #[arg(long, global = true)]
    eps_stop: Option<f64>,
    /// Override the radius grid: number of radii.
    #[arg(long, global = true)]
    eps_points: Option<usize>,
    /// Suppress per-artifact progress lines.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Covering numbers on a radius grid, with chaining bounds.
    Entropy,
    /// Covering growth under `d` versus the process distance `dX`.
    CompareMetrics,
    /// Monte Carlo estimates of the supremum statistic across depths.
    Simulate,
    /// Boundedness verdict for one weight system or a batch.
    Criteria,
    /// Rerun a bundled experiment.
    Reproduce {
        #[arg(value_enum)]
        target: Target,
    },
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            replicas: self.replicas,
            depths: self.depth.clone(),
            eps_start: self.eps_start,
            eps_stop: self.eps_stop,
            eps_points: self.eps_points,
        }
    }

    fn load_config(&self) -> Result<ExperimentConfig> {
        let path = self.config.as_deref().ok_or_else(|| {
            ConfigError("this subcommand needs --config <FILE>".to_string())
        })?;
        Ok(ExperimentConfig::load(path)?.resolve(&self.overrides())?)
    }
}

/// Honor TREEGAUSS_THREADS before any parallel work starts.
fn init_threads() {
    if let Ok(raw) = std::env::var("TREEGAUSS_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<treegauss::Error>() {
        Some(treegauss::Error::DepthCap { .. }) => 3,
        Some(treegauss::Error::NotHomogeneous(_)) => 4,
        _ => 1,
    }
}

fn run(cli: &Cli) -> Result<()> {
    let ctx = Ctx { out: &cli.out, quiet: cli.quiet };
    match &cli.cmd {
        Cmd::Entropy => commands::run_entropy(&cli.load_config()?, &ctx),
        Cmd::CompareMetrics => commands::run_compare_metrics(&cli.load_config()?, &ctx),
        Cmd::Simulate => commands::run_simulate(&cli.load_config()?, &ctx, ""),
        Cmd::Criteria => commands::run_criteria(&cli.load_config()?, &ctx, ""),
        Cmd::Reproduce { target } => commands::run_reproduce(*target, &cli.overrides(), &ctx),
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

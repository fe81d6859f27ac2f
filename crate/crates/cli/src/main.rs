use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use msde_cli::{ExperimentConfig, ExperimentKind};

#[derive(Debug, Parser)]
#[command(
    name = "msde",
    version,
    about = "Simulate manifold diffusions and estimate their drift and diffusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a trajectory and write it in the binary trajectory format.
    Simulate(Common),
    /// Evaluate the estimators at the configured base points.
    Estimate(Common),
    /// Run the experiment named in the config.
    Experiment(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (overrides `workers`).
    #[arg(long)]
    threads: Option<usize>,
    /// Trajectory file to read or write (overrides `trajectory_file`).
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

impl Common {
    fn load(&self, kind: Option<ExperimentKind>) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(kind) = kind {
            cfg.experiment = kind;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(threads) = self.threads {
            cfg.workers = threads;
        }
        if let Some(t) = &self.trajectory {
            cfg.trajectory_file = Some(t.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (common, kind) = match &cli.command {
        Command::Simulate(c) => (c, Some(ExperimentKind::Simulate)),
        Command::Estimate(c) => (c, Some(ExperimentKind::Estimate)),
        Command::Experiment(c) => (c, None),
    };
    let cfg = common.load(kind)?;
    info!("running {:?} into {}", cfg.experiment, cfg.output_dir.display());
    let summary = msde_cli::run(&cfg).with_context(|| format!("{:?} failed", cfg.experiment))?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

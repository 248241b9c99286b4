//! Command-line pipeline: synthesize data, train the boundary regressor and
//! the two-stage denoiser, fill gaps with pseudo-crowns, sample, evaluate and
//! analyse reader scores. Every step reads and writes under one workspace
//! directory.

pub mod commands;
pub mod config;
pub mod error;
pub mod readers;
pub mod workspace;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::Ctx;
use crate::error::{CliError, CliResult};
use crate::workspace::Workspace;

#[derive(Debug, Parser)]
#[command(name = "dentgen", version, about = "Tooth crown generation pipeline")]
pub struct Cli {
    /// JSON config (`//` comments allowed), merged over the built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override a config value, e.g. `--set stage1.epochs=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,

    /// Master seed; replaces `seed` from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads. Results do not depend on it.
    #[arg(long, default_value_t = 1, global = true)]
    pub jobs: usize,

    /// Replace the output of a step that already ran.
    #[arg(long, global = true)]
    pub force: bool,

    /// Workspace root.
    #[arg(long, default_value = "dentgen-out", global = true)]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Synthetic train/test/partial dentitions and simulated reader scores.
    Synth,
    /// Train the cylinder-bound regressor.
    TrainBoundary,
    /// Train the denoiser; stage 2 fine-tunes stage 1 on the pseudo-completed set.
    TrainDenoiser {
        #[arg(long, default_value_t = 1)]
        stage: u8,
    },
    /// Fill every gap of the partial dentitions with stage-1 crowns.
    BootstrapPseudo,
    /// Generate crowns for masking scenarios of the test dentitions.
    Sample,
    /// Score sampled crowns and bounds against the ground truth.
    Evaluate,
    /// Non-inferiority and agreement analysis of the reader scores.
    Stats,
    /// Print the effective configuration as JSON.
    Config,
}

pub fn run(cli: Cli) -> CliResult<()> {
    if cli.jobs == 0 {
        return Err(CliError::Validation("--jobs must be at least 1".into()));
    }
    let cfg = config::load(cli.config.as_deref(), &cli.overrides, cli.seed)?;
    if let Command::Config = cli.command {
        println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        return Ok(());
    }
    let ctx = Ctx {
        cfg,
        ws: Workspace::new(&cli.out),
        force: cli.force,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Synth => commands::synth(&ctx),
        Command::TrainBoundary => commands::train_boundary(&ctx),
        Command::TrainDenoiser { stage } => commands::train_denoiser_stage(&ctx, stage),
        Command::BootstrapPseudo => commands::bootstrap_pseudo(&ctx),
        Command::Sample => commands::sample(&ctx),
        Command::Evaluate => commands::evaluate(&ctx),
        Command::Stats => commands::stats(&ctx),
        Command::Config => unreachable!(),
    })
}

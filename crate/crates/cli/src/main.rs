//! `aes3d`: ingest, annotate, split, train, eval, score, stats and ablate.
//!
//! Exit codes: 0 success, 1 validation failure, 2 runtime failure.

mod commands;
mod config;
mod data;

use std::path::PathBuf;
use std::process::ExitCode;

use aes3d_core::synth::SynthConfig;
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::commands::Which;
use crate::config::RunArgs;

/// A failure caused by the inputs rather than by the computation.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

/// Provenance block embedded in every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub command: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
}

#[derive(Parser)]
#[command(name = "aes3d", version, about = "Scene-level aesthetic scoring on Gaussian splats")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a directory of PLY scenes against a camera manifest and write index.json.
    Ingest(RunArgs),
    /// Aggregate view annotations into labels.json and annotation_stats.json.
    Annotate(RunArgs),
    /// Print annotation statistics as JSON.
    Stats(RunArgs),
    /// Write the holdout split for every seed.
    Split(RunArgs),
    /// Train one model per seed.
    Train(RunArgs),
    /// Evaluate trained checkpoints and aggregate across seeds.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "last")]
        checkpoint: Which,
    },
    /// Predict scores for (possibly unlabelled) scenes.
    Score {
        #[command(flatten)]
        run: RunArgs,
        /// Defaults to the first seed's final checkpoint in the output directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train and evaluate an ablation preset, or list the presets.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, conflicts_with = "list")]
        preset: Option<String>,
        #[arg(long)]
        list: bool,
    },
    /// Write a procedural dataset with planted scores.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = SynthConfig::default().scenes)]
        scenes: usize,
        #[arg(long, default_value_t = SynthConfig::default().points)]
        points: usize,
        #[arg(long, default_value_t = SynthConfig::default().cameras)]
        cameras: usize,
        #[arg(long, default_value_t = SynthConfig::default().seed)]
        seed: u64,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest(a) => commands::ingest(&config::load(&a)?),
        Command::Annotate(a) => commands::annotate(&config::load(&a)?),
        Command::Stats(a) => commands::stats(&config::load(&a)?),
        Command::Split(a) => commands::split(&config::load(&a)?),
        Command::Train(a) => commands::train_cmd(&config::load(&a)?),
        Command::Eval { run, checkpoint } => commands::eval(&config::load(&run)?, checkpoint),
        Command::Score { run, checkpoint, seed } => commands::score(&config::load(&run)?, checkpoint.as_deref(), seed),
        Command::Ablate { list: true, .. } => {
            commands::list_presets();
            Ok(())
        }
        Command::Ablate { mut run, preset, .. } => {
            let name = preset.or(run.ablation.clone()).ok_or_else(|| Invalid("--preset or --list is required".into()))?;
            let base = run.output_dir.clone().unwrap_or_else(|| PathBuf::from("runs"));
            run.output_dir = Some(base.join("ablations").join(&name));
            run.ablation = Some(name);
            let eff = config::load(&run)?;
            commands::train_cmd(&eff)?;
            commands::eval(&eff, Which::Last)
        }
        Command::Synth { out, scenes, points, cameras, seed } => {
            commands::synth(&out, &SynthConfig { scenes, points, cameras, seed })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.is::<Invalid>() { 1 } else { 2 })
        }
    }
}

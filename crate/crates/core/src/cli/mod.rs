//! Command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input (config, paths, vocabulary,
//! checkpoint), 1 failure during computation or output.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::kg_store::Split;
use crate::synthetic::SyntheticConfig;

pub use config::{RawConfig, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(Error),
    #[error("{0}")]
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "demix-kge", version, about = "Knowledge graph embedding with denoising-mixup negatives")]
pub struct Cli {
    /// Worker threads for evaluation (falls back to DEMIX_KGE_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DiagnoseMode {
    #[value(name = "estimation_accuracy", alias = "estimation-accuracy")]
    EstimationAccuracy,
    #[value(name = "leakage_compare", alias = "leakage-compare")]
    LeakageCompare,
    #[value(name = "export_embeddings", alias = "export-embeddings")]
    ExportEmbeddings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Valid,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Valid => Split::Valid,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model; writes checkpoints, metrics.csv and config.resolved.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Override a config key, e.g. --set trainer.epochs=50
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Filtered link-prediction metrics for a checkpoint.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Diagnostics over trained models.
    Diagnose {
        #[arg(long, value_enum)]
        mode: DiagnoseMode,
        /// Required except for export_embeddings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Checkpoints to inspect; estimation_accuracy defaults to the run's epoch_*.ckpt files.
        #[arg(long)]
        checkpoint: Vec<PathBuf>,
        /// Output directory for export_embeddings when no config is given.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Write a synthetic dataset with held-out facts.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = SyntheticConfig::default().entities)]
        entities: usize,
        #[arg(long, default_value_t = SyntheticConfig::default().relations)]
        relations: usize,
        #[arg(long, default_value_t = SyntheticConfig::default().fanout)]
        fanout: usize,
        #[arg(long, default_value_t = SyntheticConfig::default().participation)]
        participation: f64,
        #[arg(long, default_value_t = SyntheticConfig::default().holdout)]
        holdout: f64,
    },
}

fn configure_threads(threads: Option<usize>) -> CliResult<()> {
    let threads = match threads {
        Some(n) => Some(n),
        None => match std::env::var("DEMIX_KGE_THREADS") {
            Ok(v) => Some(v.trim().parse().map_err(|_| {
                CliError::Validation(Error::config(format!("DEMIX_KGE_THREADS = {v:?} is not a count")))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Validation(Error::config("--threads must be >= 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(Error::Invariant(format!("thread pool: {e}"))))?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> CliResult<()> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Train { config, overrides } => commands::cmd_train(&commands::load_config(&config, &overrides)?),
        Command::Eval {
            config,
            checkpoint,
            split,
            overrides,
        } => commands::cmd_eval(&commands::load_config(&config, &overrides)?, &checkpoint, split.into()),
        Command::Diagnose {
            mode,
            config,
            checkpoint,
            out,
            overrides,
        } => {
            let config = config
                .map(|c| commands::load_config(&c, &overrides))
                .transpose()?;
            let need = || {
                config.as_ref().ok_or_else(|| {
                    CliError::Validation(Error::config("this diagnose mode needs --config"))
                })
            };
            match mode {
                DiagnoseMode::EstimationAccuracy => commands::cmd_estimation_accuracy(need()?, &checkpoint),
                DiagnoseMode::LeakageCompare => commands::cmd_leakage_compare(need()?),
                DiagnoseMode::ExportEmbeddings => {
                    let [ckpt] = checkpoint.as_slice() else {
                        return Err(CliError::Validation(Error::config(
                            "export_embeddings needs exactly one --checkpoint",
                        )));
                    };
                    let dir = out
                        .or_else(|| config.as_ref().map(|c| c.output_dir.clone()))
                        .unwrap_or_else(|| PathBuf::from("."));
                    commands::cmd_export_embeddings(ckpt, &dir)
                }
            }
        }
        Command::Synth {
            out,
            seed,
            entities,
            relations,
            fanout,
            participation,
            holdout,
        } => {
            let cfg = SyntheticConfig {
                entities,
                relations,
                fanout,
                participation,
                holdout,
                seed,
                ..SyntheticConfig::default()
            };
            commands::cmd_synth(&cfg, &out)
        }
    }
}

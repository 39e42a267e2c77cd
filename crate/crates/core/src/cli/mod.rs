//! Command-line entry points: `extract-features`, `train`, `predict`, `evaluate`.
//!
//! Exit codes: 0 success, 1 validation error (bad inputs, partial extraction),
//! 2 runtime or numeric error.

mod commands;
mod run_config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::{
    cmd_evaluate, cmd_extract_features, cmd_predict, cmd_train, read_predictions, read_wav,
    write_wav, EvaluateOptions, ExtractOptions, ExtractSummary, FeatureIndex, Frontend,
    PredictOptions, PredictionRow, TrainOptions, INDEX_FILE, PREDICTION_HEADER, STACK_EXTENSION,
};
pub use run_config::{RunConfig, KEYS as RUN_CONFIG_KEYS, SEED_ENV};

use crate::data::ScoreScale;
use crate::error::AesaError;
use crate::metrics::Level;

pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_RUNTIME: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "aesa",
    version,
    about = "Multi-axis audio aesthetics prediction"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FrontendKind {
    Synthetic,
    Precomputed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LevelArg {
    Utterance,
    System,
}

#[derive(Debug, clap::Args)]
pub struct ScaleArgs {
    /// Lower end of the rating scale.
    #[arg(long, default_value_t = 1.0)]
    pub score_lower: f64,
    /// Upper end of the rating scale.
    #[arg(long, default_value_t = 10.0)]
    pub score_upper: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one layer-stack file per manifest clip plus an index.
    ExtractFeatures {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t = FrontendKind::Synthetic)]
        frontend: FrontendKind,
        /// Directory of `<clip_id>.aesf` files (precomputed frontend).
        #[arg(long)]
        precomputed_dir: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Layer count of the synthetic frontend.
        #[arg(long, default_value_t = 13)]
        layers: usize,
        /// Feature width of the synthetic frontend.
        #[arg(long, default_value_t = 768)]
        dim: usize,
        #[command(flatten)]
        scale: ScaleArgs,
    },
    /// Fit a model and write the best checkpoint, history, and run metadata.
    Train {
        /// `key = value` run configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        features_dir: Option<PathBuf>,
        #[arg(long)]
        checkpoint_out: Option<PathBuf>,
        /// Defaults to `<checkpoint_out>.history.jsonl`.
        #[arg(long)]
        history_out: Option<PathBuf>,
        /// Defaults to `<checkpoint_out>.meta.txt`.
        #[arg(long)]
        metadata_out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Start from an existing checkpoint instead of a fresh init.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Score every manifest clip with a checkpoint.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        features_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute MSE/LCC/SRCC/KTAU per (domain, axis); writes `<out>.txt` and `<out>.csv`.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, value_enum, default_value_t = LevelArg::System)]
        level: LevelArg,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        scale: ScaleArgs,
    },
}

fn suffixed(path: &std::path::Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn env_seed() -> crate::Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| AesaError::Config(format!("{SEED_ENV}=`{v}` is not an integer"))),
        Err(_) => Ok(None),
    }
}

fn required(value: Option<PathBuf>, name: &str) -> crate::Result<PathBuf> {
    value.ok_or_else(|| AesaError::Config(format!("`{name}` must be given by flag or config")))
}

/// Run a parsed command, returning the process exit code.
pub fn run(cli: Cli) -> ExitCode {
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            })
        }
    }
}

fn execute(command: Command) -> crate::Result<ExitCode> {
    match command {
        Command::ExtractFeatures {
            manifest,
            frontend,
            precomputed_dir,
            out_dir,
            seed,
            layers,
            dim,
            scale,
        } => {
            let frontend = match frontend {
                FrontendKind::Synthetic => Frontend::Synthetic { layers, dims: dim },
                FrontendKind::Precomputed => {
                    Frontend::Precomputed(required(precomputed_dir, "precomputed-dir")?)
                }
            };
            let opts = ExtractOptions {
                manifest,
                frontend,
                out_dir,
                seed: seed.or(env_seed()?).unwrap_or(0),
                scale: ScoreScale::new(scale.score_lower, scale.score_upper)?,
            };
            let summary = cmd_extract_features(&opts)?;
            println!("wrote {} feature files", summary.written.len());
            for (clip, err) in &summary.failures {
                eprintln!("failed: {clip}: {err}");
            }
            Ok(if summary.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VALIDATION)
            })
        }
        Command::Train {
            config,
            manifest,
            features_dir,
            checkpoint_out,
            history_out,
            metadata_out,
            seed,
            resume,
        } => {
            let mut cfg = match config {
                Some(path) => RunConfig::load(path)?,
                None => RunConfig::default(),
            };
            cfg.apply_seed_override(seed)?;
            let manifest = required(manifest.or(cfg.manifest.clone()), "manifest")?;
            let features_dir = required(features_dir.or(cfg.features_dir.clone()), "features_dir")?;
            let checkpoint_out = required(
                checkpoint_out.or(cfg.checkpoint_out.clone()),
                "checkpoint_out",
            )?;
            let history_out = history_out
                .or(cfg.history_out.clone())
                .unwrap_or_else(|| suffixed(&checkpoint_out, ".history.jsonl"));
            let metadata_out = metadata_out
                .or(cfg.metadata_out.clone())
                .unwrap_or_else(|| suffixed(&checkpoint_out, ".meta.txt"));
            cfg.manifest = Some(manifest.clone());
            cfg.features_dir = Some(features_dir.clone());
            cfg.checkpoint_out = Some(checkpoint_out.clone());
            cfg.history_out = Some(history_out.clone());
            cfg.metadata_out = Some(metadata_out.clone());
            let result = cmd_train(&TrainOptions {
                config: cfg,
                manifest,
                features_dir,
                checkpoint_out,
                history_out,
                metadata_out,
                resume,
            })?;
            println!(
                "best epoch {} of {} (validation MSE {:.6})",
                result.best_epoch,
                result.history.len(),
                result.best_val_mse
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Predict {
            checkpoint,
            manifest,
            features_dir,
            out,
        } => {
            let rows = cmd_predict(&PredictOptions {
                checkpoint,
                manifest,
                features_dir,
                out,
            })?;
            println!("wrote {rows} predictions");
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate {
            predictions,
            gold,
            level,
            out,
            scale,
        } => {
            let (_, table) = cmd_evaluate(&EvaluateOptions {
                predictions,
                gold,
                level: match level {
                    LevelArg::Utterance => Level::Utterance,
                    LevelArg::System => Level::System,
                },
                out,
                scale: ScoreScale::new(scale.score_lower, scale.score_upper)?,
            })?;
            print!("{table}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

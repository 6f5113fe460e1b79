//! Command-line arguments.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use super::config::ExperimentConfig;
use super::corpora::CorpusLayout;
use super::manifest::Protocol;
use crate::dsp::WindowShape;
use crate::train_eval::SplitMode;

#[derive(Debug, Parser)]
#[command(
    name = "mwa-ser",
    version,
    about = "Multi-window speech emotion recognition"
)]
pub struct Cli {
    /// Log verbosity: error, warn, info, debug, trace.
    #[arg(long, global = true, default_value = "info")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract and cache features for every configured window.
    Extract(RunArgs),
    /// Train one multi-window model and evaluate it.
    Train(RunArgs),
    /// Re-evaluate a trained run from its checkpoint.
    Eval(RunArgs),
    /// Train and evaluate every non-empty window subset.
    Sweep(RunArgs),
    /// Render comparison tables from finished runs.
    Report {
        /// Run or sweep directory.
        dir: PathBuf,
    },
    /// Write a manifest CSV for a corpus with a known file layout.
    MakeManifest {
        #[arg(long)]
        layout: CorpusLayout,
        /// Corpus root directory.
        #[arg(long)]
        root: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Manifest CSV: utterance_id,audio_path,label[,speaker,session].
    #[arg(long)]
    pub manifest: PathBuf,
    /// Run directory for all artifacts.
    #[arg(long)]
    pub out: PathBuf,
    /// TOML config; flags below override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

fn enum_value<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// One flag per config key.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// Comma-separated window widths in milliseconds.
    #[arg(long, value_delimiter = ',')]
    pub windows_ms: Option<Vec<f64>>,
    #[arg(long)]
    pub overlap: Option<f64>,
    /// hamming or rectangular.
    #[arg(long, value_parser = enum_value::<WindowShape>)]
    pub window_shape: Option<WindowShape>,
    #[arg(long)]
    pub max_frames: Option<usize>,
    #[arg(long)]
    pub n_features: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// IEMOCAP_EXP1, IEMOCAP_EXP2, SAVEE6, RAVDESS6 or CUSTOM.
    #[arg(long)]
    pub protocol: Option<Protocol>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub deterministic: Option<bool>,
    #[arg(long)]
    pub z_score: Option<bool>,
    /// stratified or speaker.
    #[arg(long, value_parser = enum_value::<SplitMode>)]
    pub split_mode: Option<SplitMode>,
    #[arg(long)]
    pub early_stop_patience: Option<usize>,
    #[arg(long)]
    pub skip_unreadable: Option<bool>,
    #[arg(long)]
    pub parallel_subsets: Option<bool>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { cfg.$field = v.clone(); })*
            };
        }
        set!(
            windows_ms,
            overlap,
            window_shape,
            max_frames,
            n_features,
            lr,
            epochs,
            batch_size,
            train_fraction,
            seed,
            protocol,
            cache_dir,
            deterministic,
            z_score,
            split_mode,
            skip_unreadable,
            parallel_subsets
        );
        if let Some(p) = self.early_stop_patience {
            cfg.early_stop_patience = Some(p);
        }
    }
}

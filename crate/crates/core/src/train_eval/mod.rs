//! Training protocol, metrics and the multi-window test protocol.

mod eval;
mod metrics;
mod split;
mod trainer;

pub use eval::{
    evaluate, multiwindow_evaluate, select_best, write_confusion_csv, EvalReport, WindowResult,
};
pub use metrics::{ConfusionMatrix, Metrics};
pub use split::{speaker_split, stratified_split, train_count, SplitItem, SplitMode};
pub use trainer::{batch_tensor, train, EpochStats, TrainHistory};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("cannot split: {0}")]
    Split(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("no test windows to evaluate")]
    NoWindows,
    #[error("label {label} is outside the model's {classes} classes")]
    ClassMismatch { label: usize, classes: usize },
    #[error("feature matrix is {got:?}, model expects {expected:?}")]
    InputShape {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("per-window test sets differ in size: {0:?}")]
    UnequalTestSets(Vec<usize>),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub train_fraction: f64,
    pub seed: u64,
    /// Stop after this many epochs without a lower training loss.
    pub early_stop_patience: Option<usize>,
    /// Standardize each feature column with training-set statistics.
    pub z_score: bool,
    pub split_mode: SplitMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.0004,
            epochs: 1000,
            batch_size: 32,
            train_fraction: 0.8,
            seed: 0,
            early_stop_patience: None,
            z_score: true,
            split_mode: SplitMode::Stratified,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(TrainError::Config(format!(
                "train_fraction must be in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.batch_size < 2 {
            return Err(TrainError::Config(format!(
                "batch_size must be at least 2 for batch normalization, got {}",
                self.batch_size
            )));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(TrainError::Config(format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        if self.early_stop_patience == Some(0) {
            return Err(TrainError::Config(
                "early_stop_patience must be positive".into(),
            ));
        }
        Ok(())
    }
}

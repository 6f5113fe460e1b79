//! Flat TOML experiment configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::Protocol;
use crate::dsp::{WindowShape, WindowSpec};
use crate::features::{FeatureConfig, N_FEATURES};
use crate::train_eval::{SplitMode, TrainConfig};

/// Every key is optional in the file; absent keys take these defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub windows_ms: Vec<f64>,
    pub overlap: f64,
    pub window_shape: WindowShape,
    pub max_frames: usize,
    pub n_features: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub protocol: Protocol,
    pub cache_dir: PathBuf,
    /// Run every parallel section on one thread.
    pub deterministic: bool,
    pub z_score: bool,
    pub split_mode: SplitMode,
    pub early_stop_patience: Option<usize>,
    pub skip_unreadable: bool,
    /// Train sweep subsets concurrently.
    pub parallel_subsets: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            windows_ms: vec![25.0, 50.0, 100.0, 200.0],
            overlap: 0.5,
            window_shape: WindowShape::Hamming,
            max_frames: 200,
            n_features: N_FEATURES,
            lr: t.lr,
            epochs: t.epochs,
            batch_size: t.batch_size,
            train_fraction: t.train_fraction,
            seed: t.seed,
            protocol: Protocol::Custom,
            cache_dir: PathBuf::from("feature_cache"),
            deterministic: true,
            z_score: t.z_score,
            split_mode: t.split_mode,
            early_stop_patience: t.early_stop_patience,
            skip_unreadable: false,
            parallel_subsets: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: Self = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn window_specs(&self) -> Result<Vec<WindowSpec>, ConfigError> {
        self.windows_ms
            .iter()
            .map(|&ms| {
                WindowSpec::new(ms, self.overlap, self.window_shape)
                    .map_err(|e| ConfigError::Invalid(e.to_string()))
            })
            .collect()
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            max_frames: self.max_frames,
            ..FeatureConfig::default()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            epochs: self.epochs,
            batch_size: self.batch_size,
            train_fraction: self.train_fraction,
            seed: self.seed,
            early_stop_patience: self.early_stop_patience,
            z_score: self.z_score,
            split_mode: self.split_mode,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_features != N_FEATURES {
            return Err(ConfigError::Invalid(format!(
                "n_features is fixed at {N_FEATURES}, got {}",
                self.n_features
            )));
        }
        if self.max_frames < 16 {
            return Err(ConfigError::Invalid(format!(
                "max_frames must be at least 16 for four pooling stages, got {}",
                self.max_frames
            )));
        }
        let specs = self.window_specs()?;
        crate::augment::validate_windows(&specs)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.train_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

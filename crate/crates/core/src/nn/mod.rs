//! A small from-scratch CNN stack: NHWC tensors, convolution, batch
//! normalization, max pooling, dropout, dense layers, softmax cross-entropy
//! and RMSprop.
//!
//! Everything is `f64` and single-writer. Reductions run in a fixed order, so
//! a given seed reproduces a training run bit for bit.

pub mod checkpoint;
mod gemm;
pub mod gradcheck;
pub mod layers;
mod loss;
mod model;
mod optim;
mod tensor;

pub use layers::{BatchNorm, Conv2d, Dense, Dropout, Flatten, Layer, MaxPool2, Relu};
pub use loss::{softmax, softmax_cross_entropy, softmax_cross_entropy_indices};
pub(crate) use model::argmax;
pub use model::{Architecture, CnnModel, ConvBlock, LayerSummary};
pub use optim::{rmsprop_step, RmsProp, RmsPropConfig};
pub use tensor::Tensor;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// RNG driving initialization, dropout masks and shuffling.
pub type ModelRng = ChaCha8Rng;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("batch normalization needs at least 2 examples in training mode, got {0}")]
    BatchTooSmall(usize),
    #[error("dropout probability must be in [0, 1), got {0}")]
    InvalidDropout(f64),
    #[error("backward called without a preceding forward pass")]
    NoForwardCache,
    #[error("labels are not one-hot")]
    NotOneHot,
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
}

/// Forward-pass behaviour of dropout and batch normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active, batch statistics, running averages updated.
    Train,
    /// Dropout off, running statistics.
    Infer,
    /// Dropout active but batch normalization uses (and does not update) its
    /// running statistics. Makes the loss a fixed smooth function of the
    /// parameters for finite-difference checks.
    FrozenStats,
}

impl Mode {
    pub fn dropout_active(self) -> bool {
        !matches!(self, Mode::Infer)
    }
}

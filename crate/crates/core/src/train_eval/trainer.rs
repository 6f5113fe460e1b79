use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{TrainConfig, TrainError};
use crate::augment::Example;
use crate::features::ColumnStats;
use crate::nn::{CnnModel, Mode, RmsProp, RmsPropConfig, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean training loss over the epoch's examples.
    pub loss: f64,
    /// Training accuracy with dropout active, as seen during the epoch.
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    pub stopped_early: bool,
}

/// `[batch, rows, 34, 1]` input tensor, optionally z-scored.
pub fn batch_tensor<'a>(
    examples: impl IntoIterator<Item = &'a Example>,
    norm: Option<&ColumnStats>,
) -> Tensor {
    let mut data = Vec::new();
    let mut shape = vec![0, 0, 0, 1];
    for e in examples {
        let m = &e.features;
        shape[1] = m.rows();
        shape[2] = m.cols();
        let start = data.len();
        data.resize(start + m.values().len(), 0.0);
        match norm {
            Some(stats) => stats.apply(m.values(), &mut data[start..]),
            None => {
                for (d, &v) in data[start..].iter_mut().zip(m.values()) {
                    *d = v as f64;
                }
            }
        }
        shape[0] += 1;
    }
    Tensor::new(shape, data).expect("non-empty batch of equal-sized matrices")
}

pub(crate) fn check_examples(model: &CnnModel, examples: &[Example]) -> Result<(), TrainError> {
    let arch = model.architecture();
    let expected = (arch.input_height, arch.input_width);
    for e in examples {
        let got = (e.features.rows(), e.features.cols());
        if got != expected || arch.input_channels != 1 {
            return Err(TrainError::InputShape { expected, got });
        }
        if e.label >= arch.classes {
            return Err(TrainError::ClassMismatch {
                label: e.label,
                classes: arch.classes,
            });
        }
    }
    Ok(())
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((1 << 32) | epoch as u64);
    rng
}

/// Trains `model` in place: per epoch, shuffle the pooled examples with an
/// epoch-seeded RNG, then RMSprop over minibatches. A trailing batch of one
/// example is skipped because batch normalization cannot train on it.
/// `on_epoch` may stop training early by returning `Break`.
pub fn train(
    model: &mut CnnModel,
    examples: &[Example],
    norm: Option<&ColumnStats>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats) -> ControlFlow<()>,
) -> Result<TrainHistory, TrainError> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    check_examples(model, examples)?;
    let mut opt = RmsProp::new(RmsPropConfig {
        learning_rate: cfg.lr,
        ..RmsPropConfig::default()
    });
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut epoch_rng(cfg.seed, epoch));
        let (mut loss_sum, mut correct, mut seen) = (0.0, 0usize, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let x = batch_tensor(chunk.iter().map(|&i| &examples[i]), norm);
            let labels: Vec<usize> = chunk.iter().map(|&i| examples[i].label).collect();
            let (loss, logits) = model.loss_and_gradients(x, &labels, Mode::Train)?;
            opt.step(model.layers_mut());
            loss_sum += loss * chunk.len() as f64;
            correct += logits
                .data()
                .chunks_exact(model.classes())
                .zip(&labels)
                .filter(|(row, &l)| crate::nn::argmax(row) == l)
                .count();
            seen += chunk.len();
        }
        if seen == 0 {
            return Err(TrainError::EmptyTrainingSet);
        }
        let stats = EpochStats {
            epoch,
            loss: loss_sum / seen as f64,
            accuracy: correct as f64 / seen as f64,
        };
        log::debug!(
            "epoch {epoch}: loss {:.5} acc {:.4}",
            stats.loss,
            stats.accuracy
        );
        history.epochs.push(stats);
        if on_epoch(&stats).is_break() {
            history.stopped_early = true;
            break;
        }
        if let Some(patience) = cfg.early_stop_patience {
            if stats.loss < best {
                best = stats.loss;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    history.stopped_early = true;
                    break;
                }
            }
        }
    }
    Ok(history)
}

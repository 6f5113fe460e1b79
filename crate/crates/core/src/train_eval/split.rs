use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::augment::Split;

/// How utterances are divided between train and test.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Per-class random split by utterance.
    #[default]
    Stratified,
    /// Whole speakers go to one side, so no voice is seen in both.
    Speaker,
}

/// What a split needs to know about one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitItem<'a> {
    pub id: &'a str,
    pub label: usize,
    pub speaker: Option<&'a str>,
}

/// `round(fraction·n)` with halves rounded up.
pub fn train_count(n: usize, fraction: f64) -> usize {
    (fraction * n as f64 + 0.5).floor() as usize
}

fn check_fraction(fraction: f64) -> Result<(), TrainError> {
    if fraction > 0.0 && fraction < 1.0 {
        Ok(())
    } else {
        Err(TrainError::Config(format!(
            "train_fraction must be in (0, 1), got {fraction}"
        )))
    }
}

/// Restores manifest order inside each side of the split.
fn ordered(items: &[SplitItem<'_>], mut train_flags: Vec<bool>) -> Split {
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for (item, is_train) in items.iter().zip(train_flags.drain(..)) {
        if is_train {
            split.train.push(item.id.to_string());
        } else {
            split.test.push(item.id.to_string());
        }
    }
    split
}

/// Shuffles each class with a seeded RNG (classes visited in label order)
/// and sends `round(fraction·n)` of it to train, keeping at least one
/// utterance on each side.
pub fn stratified_split(
    items: &[SplitItem<'_>],
    fraction: f64,
    seed: u64,
) -> Result<Split, TrainError> {
    check_fraction(fraction)?;
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        by_class.entry(item.label).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flags = vec![false; items.len()];
    for (label, mut members) in by_class {
        let n = members.len();
        if n < 2 {
            return Err(TrainError::Split(format!(
                "class {label} has {n} utterance(s); at least 2 are needed"
            )));
        }
        members.shuffle(&mut rng);
        let k = train_count(n, fraction).clamp(1, n - 1);
        for &i in &members[..k] {
            flags[i] = true;
        }
    }
    Ok(ordered(items, flags))
}

/// Assigns shuffled speakers to train until it holds `round(fraction·N)`
/// utterances; the rest form the test side.
pub fn speaker_split(
    items: &[SplitItem<'_>],
    fraction: f64,
    seed: u64,
) -> Result<Split, TrainError> {
    check_fraction(fraction)?;
    let mut speakers: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        let spk = item
            .speaker
            .ok_or_else(|| TrainError::Split(format!("{} has no speaker", item.id)))?;
        speakers.entry(spk).or_default().push(i);
    }
    if speakers.len() < 2 {
        return Err(TrainError::Split(format!(
            "speaker split needs at least 2 speakers, found {}",
            speakers.len()
        )));
    }
    let mut order: Vec<&str> = speakers.keys().copied().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let target = train_count(items.len(), fraction);
    let mut flags = vec![false; items.len()];
    let mut taken = 0;
    for (k, spk) in order.iter().enumerate() {
        let last = k + 1 == order.len();
        if taken >= target.max(1) || last {
            break;
        }
        for &i in &speakers[spk] {
            flags[i] = true;
        }
        taken += speakers[spk].len();
    }
    Ok(ordered(items, flags))
}

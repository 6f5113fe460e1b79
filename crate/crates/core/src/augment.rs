//! Multi-window augmentation: each training utterance contributes one
//! feature matrix per window size to a single pooled training set, while the
//! test side stays grouped by window.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dsp::WindowSpec;
use crate::features::cache::FeatureCache;
use crate::features::{FeatureError, FeatureMatrix};

/// An utterance with its class index.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledUtterance {
    pub id: String,
    pub audio_path: PathBuf,
    pub label: usize,
}

/// Utterance ids assigned to each side of a split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: FeatureMatrix,
    pub label: usize,
}

impl Example {
    pub fn utterance_id(&self) -> &str {
        &self.features.meta.utterance_id
    }
}

/// Test examples extracted with one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowTestSet {
    pub window: WindowSpec,
    pub examples: Vec<Example>,
}

/// An utterance whose audio could not be turned into features.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractionFailure {
    pub utterance_id: String,
    pub audio_path: String,
    pub window_ms: f64,
    pub error: String,
}

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("no analysis windows configured")]
    NoWindows,
    #[error("window width {0} ms is listed more than once")]
    DuplicateWindow(f64),
    #[error("split does not partition the utterances: {0}")]
    BadSplit(String),
    #[error("{} utterance(s) failed feature extraction, first: {}: {}", .0.len(), .0[0].utterance_id, .0[0].error)]
    Extraction(Vec<ExtractionFailure>),
    #[error("every utterance on the {0} side failed extraction")]
    NothingLeft(&'static str),
    #[error("writing dataset index {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AugmentOptions {
    /// Drop utterances whose audio fails instead of aborting.
    pub skip_unreadable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDataset {
    pub windows: Vec<WindowSpec>,
    pub class_names: Vec<String>,
    /// Pooled across windows, utterance-major.
    pub train: Vec<Example>,
    /// One entry per window, in `windows` order.
    pub test: Vec<WindowTestSet>,
    pub failures: Vec<ExtractionFailure>,
}

/// One line of the dataset index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexEntry {
    pub utterance_id: String,
    pub window_ms: f64,
    pub cache_path: String,
    pub label: usize,
    pub class_name: String,
    pub split: &'static str,
}

pub fn validate_windows(windows: &[WindowSpec]) -> Result<(), AugmentError> {
    if windows.is_empty() {
        return Err(AugmentError::NoWindows);
    }
    for (i, w) in windows.iter().enumerate() {
        if windows[..i].iter().any(|o| o.width_ms == w.width_ms) {
            return Err(AugmentError::DuplicateWindow(w.width_ms));
        }
    }
    Ok(())
}

fn check_split(utterances: &[LabeledUtterance], split: &Split) -> Result<(), AugmentError> {
    let known: HashSet<&str> = utterances.iter().map(|u| u.id.as_str()).collect();
    let mut seen = HashSet::new();
    for id in split.train.iter().chain(&split.test) {
        if !known.contains(id.as_str()) {
            return Err(AugmentError::BadSplit(format!("unknown utterance {id}")));
        }
        if !seen.insert(id.as_str()) {
            return Err(AugmentError::BadSplit(format!("{id} assigned twice")));
        }
    }
    if seen.len() != known.len() {
        return Err(AugmentError::BadSplit(format!(
            "{} of {} utterances unassigned",
            known.len() - seen.len(),
            known.len()
        )));
    }
    Ok(())
}

impl AugmentedDataset {
    /// Number of distinct training utterances (`Tₛ`).
    pub fn train_utterances(&self) -> usize {
        self.train.len() / self.windows.len()
    }

    pub fn index(&self, cache: &FeatureCache) -> Vec<IndexEntry> {
        let entry = |e: &Example, split| IndexEntry {
            utterance_id: e.utterance_id().to_string(),
            window_ms: e.features.window_ms(),
            cache_path: cache
                .entry_path(e.utterance_id(), &e.features.meta.window)
                .to_string_lossy()
                .into_owned(),
            label: e.label,
            class_name: self.class_names.get(e.label).cloned().unwrap_or_default(),
            split,
        };
        self.train
            .iter()
            .map(|e| entry(e, "train"))
            .chain(
                self.test
                    .iter()
                    .flat_map(|t| t.examples.iter().map(|e| entry(e, "test"))),
            )
            .collect()
    }

    pub fn write_index(&self, cache: &FeatureCache, path: &Path) -> Result<(), AugmentError> {
        let json = serde_json::to_vec_pretty(&self.index(cache)).expect("index serializes");
        fs::write(path, json).map_err(|source| AugmentError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Extract (or load from `cache`) every (utterance, window) matrix and
/// assemble the augmented dataset. Extraction runs in parallel; the result
/// order depends only on the inputs.
pub fn build_augmented_dataset(
    utterances: &[LabeledUtterance],
    class_names: &[String],
    split: &Split,
    windows: &[WindowSpec],
    cache: &FeatureCache,
    opts: AugmentOptions,
) -> Result<AugmentedDataset, AugmentError> {
    validate_windows(windows)?;
    check_split(utterances, split)?;
    let by_id: HashMap<&str, &LabeledUtterance> =
        utterances.iter().map(|u| (u.id.as_str(), u)).collect();
    let side: Vec<&LabeledUtterance> = split
        .train
        .iter()
        .chain(&split.test)
        .map(|id| by_id[id.as_str()])
        .collect();

    let jobs: Vec<(usize, usize)> = (0..side.len())
        .flat_map(|u| (0..windows.len()).map(move |w| (u, w)))
        .collect();
    let results: Vec<Result<FeatureMatrix, FeatureError>> = jobs
        .par_iter()
        .map(|&(u, w)| cache.get_or_compute(&side[u].id, &side[u].audio_path, &windows[w]))
        .collect();

    let mut matrices: Vec<Vec<Option<FeatureMatrix>>> = vec![vec![None; windows.len()]; side.len()];
    let mut failures = Vec::new();
    for (&(u, w), r) in jobs.iter().zip(results) {
        match r {
            Ok(m) => matrices[u][w] = Some(m),
            Err(e) => failures.push(ExtractionFailure {
                utterance_id: side[u].id.clone(),
                audio_path: side[u].audio_path.to_string_lossy().into_owned(),
                window_ms: windows[w].width_ms,
                error: e.to_string(),
            }),
        }
    }
    if !failures.is_empty() {
        if !opts.skip_unreadable {
            return Err(AugmentError::Extraction(failures));
        }
        log::warn!("skipping {} failed extraction(s)", failures.len());
    }

    let mut train = Vec::new();
    let mut test: Vec<WindowTestSet> = windows
        .iter()
        .map(|w| WindowTestSet {
            window: *w,
            examples: Vec::new(),
        })
        .collect();
    for (u, row) in matrices.into_iter().enumerate() {
        // an utterance that failed in any window is dropped from all of them
        if row.iter().any(Option::is_none) {
            continue;
        }
        let label = side[u].label;
        for (w, m) in row.into_iter().enumerate() {
            let example = Example {
                features: m.expect("checked above"),
                label,
            };
            if u < split.train.len() {
                train.push(example);
            } else {
                test[w].examples.push(example);
            }
        }
    }
    if train.is_empty() {
        return Err(AugmentError::NothingLeft("train"));
    }
    if !split.test.is_empty() && test[0].examples.is_empty() {
        return Err(AugmentError::NothingLeft("test"));
    }
    Ok(AugmentedDataset {
        windows: windows.to_vec(),
        class_names: class_names.to_vec(),
        train,
        test,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureConfig;
    use crate::synthetic::{write_tone_corpus, CorpusSpec};

    fn setup(n_per_class: usize) -> (tempfile::TempDir, Vec<LabeledUtterance>, Vec<String>) {
        let dir = tempfile::tempdir().unwrap();
        let spec = CorpusSpec {
            classes: 2,
            per_class: n_per_class,
            seconds: 0.3,
            ..CorpusSpec::default()
        };
        let corpus = write_tone_corpus(dir.path(), &spec).unwrap();
        let utts = corpus
            .iter()
            .map(|c| LabeledUtterance {
                id: c.id.clone(),
                audio_path: c.path.clone(),
                label: c.label,
            })
            .collect();
        (dir, utts, spec.class_names())
    }

    fn split_half(utts: &[LabeledUtterance]) -> Split {
        let (train, test): (Vec<_>, Vec<_>) =
            utts.iter().enumerate().partition(|(i, _)| i % 4 != 0);
        Split {
            train: train.into_iter().map(|(_, u)| u.id.clone()).collect(),
            test: test.into_iter().map(|(_, u)| u.id.clone()).collect(),
        }
    }

    fn ws(ms: &[f64]) -> Vec<WindowSpec> {
        ms.iter()
            .map(|&m| WindowSpec::half_overlap(m).unwrap())
            .collect()
    }

    #[test]
    fn train_multiplies_by_window_count() {
        let (dir, utts, names) = setup(4);
        let split = split_half(&utts);
        let cache = FeatureCache::new(dir.path().join("cache"), FeatureConfig::default()).unwrap();
        let one = build_augmented_dataset(
            &utts,
            &names,
            &split,
            &ws(&[25.0]),
            &cache,
            AugmentOptions::default(),
        )
        .unwrap();
        let three = build_augmented_dataset(
            &utts,
            &names,
            &split,
            &ws(&[25.0, 50.0, 100.0]),
            &cache,
            AugmentOptions::default(),
        )
        .unwrap();
        assert_eq!(one.train.len(), split.train.len());
        assert_eq!(three.train.len(), 3 * split.train.len());
        assert_eq!(three.train_utterances(), split.train.len());
        for t in &three.test {
            assert_eq!(t.examples.len(), split.test.len());
        }
        // single window is the plain pipeline: same matrices as the first window of the augmented set
        let first: Vec<_> = three.train.iter().step_by(3).collect();
        assert_eq!(one.train.iter().collect::<Vec<_>>(), first);
        // 25 ms matrices were reused, not recomputed
        assert_eq!(cache.misses(), utts.len() * 3);
    }

    #[test]
    fn split_hygiene_and_labels() {
        let (dir, utts, names) = setup(4);
        let split = split_half(&utts);
        let cache = FeatureCache::new(dir.path().join("cache"), FeatureConfig::default()).unwrap();
        let d = build_augmented_dataset(
            &utts,
            &names,
            &split,
            &ws(&[25.0, 50.0]),
            &cache,
            AugmentOptions::default(),
        )
        .unwrap();
        let train_ids: HashSet<&str> = d.train.iter().map(Example::utterance_id).collect();
        for t in &d.test {
            for e in &t.examples {
                assert!(!train_ids.contains(e.utterance_id()));
            }
        }
        let label_of: HashMap<&str, usize> =
            utts.iter().map(|u| (u.id.as_str(), u.label)).collect();
        assert!(d
            .train
            .iter()
            .all(|e| e.label == label_of[e.utterance_id()]));
        let index = d.index(&cache);
        assert_eq!(index.len(), d.train.len() + 2 * split.test.len());
    }

    #[test]
    fn window_validation() {
        assert!(matches!(
            validate_windows(&[]),
            Err(AugmentError::NoWindows)
        ));
        assert!(matches!(
            validate_windows(&ws(&[25.0, 50.0, 25.0])),
            Err(AugmentError::DuplicateWindow(w)) if w == 25.0
        ));
    }

    #[test]
    fn unreadable_audio_aborts_or_is_skipped() {
        let (dir, mut utts, names) = setup(3);
        utts[1].audio_path = dir.path().join("missing.wav");
        let split = Split {
            train: utts.iter().map(|u| u.id.clone()).collect(),
            test: vec![],
        };
        let cache = FeatureCache::new(dir.path().join("cache"), FeatureConfig::default()).unwrap();
        let err = build_augmented_dataset(
            &utts,
            &names,
            &split,
            &ws(&[25.0]),
            &cache,
            AugmentOptions::default(),
        );
        assert!(matches!(err, Err(AugmentError::Extraction(f)) if f.len() == 1));
        let d = build_augmented_dataset(
            &utts,
            &names,
            &split,
            &ws(&[25.0, 50.0]),
            &cache,
            AugmentOptions {
                skip_unreadable: true,
            },
        )
        .unwrap();
        assert_eq!(d.train.len(), 2 * (utts.len() - 1));
        assert_eq!(d.failures.len(), 2);
    }

    #[test]
    fn split_must_partition() {
        let (dir, utts, names) = setup(2);
        let cache = FeatureCache::new(dir.path().join("cache"), FeatureConfig::default()).unwrap();
        let mut split = split_half(&utts);
        split.test.push(split.train[0].clone());
        assert!(matches!(
            build_augmented_dataset(
                &utts,
                &names,
                &split,
                &ws(&[25.0]),
                &cache,
                AugmentOptions::default()
            ),
            Err(AugmentError::BadSplit(_))
        ));
    }
}

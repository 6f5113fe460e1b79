//! One experiment: split, augment, train, evaluate, write artifacts.

use std::fs;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{ConfigError, ExperimentConfig};
use super::manifest::{Manifest, ManifestError};
use crate::augment::{
    build_augmented_dataset, AugmentError, AugmentOptions, AugmentedDataset, ExtractionFailure,
    Split, WindowTestSet,
};
use crate::dsp::WindowSpec;
use crate::features::cache::FeatureCache;
use crate::features::{ColumnStats, FeatureError};
use crate::nn::checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
use crate::nn::{Architecture, CnnModel, NnError};
use crate::train_eval::{
    multiwindow_evaluate, speaker_split, stratified_split, train, EvalReport, SplitMode,
    TrainConfig, TrainError, TrainHistory,
};

pub const REPORT_FILE: &str = "report.json";
pub const MODEL_FILE: &str = "model.mwam";
pub const SPLIT_FILE: &str = "split.json";
pub const LOCK_FILE: &str = "manifest.lock";
pub const FAILURES_FILE: &str = "failures.json";
pub const INDEX_FILE: &str = "dataset_index.json";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] NnError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("no results found under {0}")]
    NoResults(PathBuf),
    #[error("{0}")]
    Artifact(String),
    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

/// Which exit-code family an error belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Runtime,
}

impl RunError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            RunError::Config(_) => ErrorKind::Config,
            RunError::Train(TrainError::Config(_)) => ErrorKind::Config,
            RunError::Manifest(_)
            | RunError::Augment(_)
            | RunError::Features(_)
            | RunError::NoResults(_) => ErrorKind::Data,
            RunError::Train(
                TrainError::Split(_) | TrainError::EmptyTrainingSet | TrainError::EmptyTestSet,
            ) => ErrorKind::Data,
            _ => ErrorKind::Runtime,
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<(), RunError> {
    let text = serde_json::to_string_pretty(value).map_err(|source| RunError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text).map_err(io_err(path))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, RunError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| RunError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Checkpoint sidecar: what evaluation needs besides the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSidecar {
    pub class_names: Vec<String>,
    pub windows: Vec<WindowSpec>,
    pub max_frames: usize,
    pub normalization: Option<ColumnStats>,
    pub train: TrainConfig,
    pub history: TrainHistory,
}

/// Resolved inputs of a run, written as `manifest.lock`.
#[derive(Debug, Clone, Serialize)]
struct RunLock<'a> {
    config: &'a ExperimentConfig,
    manifest: ManifestSummary<'a>,
}

#[derive(Debug, Clone, Serialize)]
struct ManifestSummary<'a> {
    protocol: String,
    rows: usize,
    class_names: &'a [String],
    class_counts: Vec<usize>,
    excluded: &'a std::collections::BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: EvalReport,
    pub history: TrainHistory,
    pub failures: Vec<ExtractionFailure>,
    pub train_examples: usize,
    pub run_dir: PathBuf,
}

/// Runs `f` on a one-thread pool when `deterministic`, else on the global pool.
pub fn with_threads<T: Send>(
    deterministic: bool,
    f: impl FnOnce() -> T + Send,
) -> Result<T, RunError> {
    if deterministic {
        Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()?
            .install(f))
    } else {
        Ok(f())
    }
}

pub fn make_split(manifest: &Manifest, cfg: &ExperimentConfig) -> Result<Split, RunError> {
    let items = manifest.split_items();
    Ok(match cfg.split_mode {
        SplitMode::Stratified => stratified_split(&items, cfg.train_fraction, cfg.seed)?,
        SplitMode::Speaker => speaker_split(&items, cfg.train_fraction, cfg.seed)?,
    })
}

pub fn open_cache(cfg: &ExperimentConfig) -> Result<FeatureCache, RunError> {
    Ok(FeatureCache::new(&cfg.cache_dir, cfg.feature_config())?)
}

fn build_dataset(
    manifest: &Manifest,
    cfg: &ExperimentConfig,
    split: &Split,
    cache: &FeatureCache,
    run_dir: &Path,
) -> Result<AugmentedDataset, RunError> {
    let result = build_augmented_dataset(
        &manifest.utterances(),
        &manifest.class_names,
        split,
        &cfg.window_specs()?,
        cache,
        AugmentOptions {
            skip_unreadable: cfg.skip_unreadable,
        },
    );
    let failures: &[ExtractionFailure] = match &result {
        Ok(d) => &d.failures,
        Err(AugmentError::Extraction(f)) => f,
        Err(_) => &[],
    };
    write_json(&run_dir.join(FAILURES_FILE), &failures)?;
    Ok(result?)
}

/// Extracts and caches every configured window for every utterance,
/// writing the split, failure report and dataset index to `run_dir`.
pub fn extract_features(
    manifest: &Manifest,
    cfg: &ExperimentConfig,
    run_dir: &Path,
    cache: &FeatureCache,
) -> Result<AugmentedDataset, RunError> {
    cfg.validate()?;
    fs::create_dir_all(run_dir).map_err(io_err(run_dir))?;
    let split = make_split(manifest, cfg)?;
    write_json(&run_dir.join(SPLIT_FILE), &split)?;
    let dataset = build_dataset(manifest, cfg, &split, cache, run_dir)?;
    dataset.write_index(cache, &run_dir.join(INDEX_FILE))?;
    Ok(dataset)
}

/// [`run_experiment_with_cache`] with a cache opened from `cfg.cache_dir`.
pub fn run_experiment(
    manifest: &Manifest,
    cfg: &ExperimentConfig,
    run_dir: &Path,
) -> Result<RunOutcome, RunError> {
    let cache = open_cache(cfg)?;
    run_experiment_with_cache(manifest, cfg, run_dir, &cache)
}

/// Split, extract every configured window, train one model on the pooled
/// windows, evaluate each window's test set, and write all artifacts to
/// `run_dir`.
pub fn run_experiment_with_cache(
    manifest: &Manifest,
    cfg: &ExperimentConfig,
    run_dir: &Path,
    cache: &FeatureCache,
) -> Result<RunOutcome, RunError> {
    cfg.validate()?;
    fs::create_dir_all(run_dir).map_err(io_err(run_dir))?;
    let lock = RunLock {
        config: cfg,
        manifest: ManifestSummary {
            protocol: manifest.protocol.to_string(),
            rows: manifest.rows.len(),
            class_names: &manifest.class_names,
            class_counts: manifest.class_counts(),
            excluded: &manifest.excluded,
        },
    };
    let lock_path = run_dir.join(LOCK_FILE);
    fs::write(&lock_path, toml::to_string(&lock).expect("lock serializes"))
        .map_err(io_err(&lock_path))?;

    let dataset = extract_features(manifest, cfg, run_dir, cache)?;
    log::info!(
        "{} train examples ({} utterances x {} windows), {} test utterances per window",
        dataset.train.len(),
        dataset.train_utterances(),
        dataset.windows.len(),
        dataset.test.first().map_or(0, |t| t.examples.len())
    );

    let train_cfg = cfg.train_config();
    let norm = train_cfg
        .z_score
        .then(|| ColumnStats::fit(dataset.train.iter().map(|e| &e.features)));
    let arch = Architecture::standard(manifest.class_names.len())
        .with_input(cfg.max_frames, cfg.n_features);
    let mut model = CnnModel::new(arch, cfg.seed)?;
    let history = with_threads(cfg.deterministic, || {
        train(&mut model, &dataset.train, norm.as_ref(), &train_cfg, |e| {
            log::info!(
                "epoch {:4}  loss {:.5}  acc {:.4}",
                e.epoch + 1,
                e.loss,
                e.accuracy
            );
            ControlFlow::Continue(())
        })
    })??;
    // evaluate exactly what the checkpoint stores
    model.round_to_f32();
    let sidecar = ModelSidecar {
        class_names: manifest.class_names.clone(),
        windows: dataset.windows.clone(),
        max_frames: cfg.max_frames,
        normalization: norm.clone(),
        train: train_cfg,
        history: history.clone(),
    };
    save_checkpoint(&run_dir.join(MODEL_FILE), &model, &sidecar)?;
    write_history_csv(&run_dir.join("history.csv"), &history)?;

    let report = with_threads(cfg.deterministic, || {
        multiwindow_evaluate(&model, &dataset.test, norm.as_ref(), &manifest.class_names)
    })??;
    write_report(&report, run_dir)?;
    Ok(RunOutcome {
        report,
        history,
        failures: dataset.failures,
        train_examples: dataset.train.len(),
        run_dir: run_dir.to_path_buf(),
    })
}

fn write_history_csv(path: &Path, history: &TrainHistory) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path).map_err(TrainError::from)?;
    let mut write = || -> Result<(), csv::Error> {
        w.write_record(["epoch", "loss", "accuracy"])?;
        for e in &history.epochs {
            w.write_record([
                (e.epoch + 1).to_string(),
                format!("{:.8}", e.loss),
                format!("{:.6}", e.accuracy),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| RunError::Train(e.into()))
}

pub fn write_report(report: &EvalReport, run_dir: &Path) -> Result<(), RunError> {
    report.write_json(&run_dir.join(REPORT_FILE))?;
    report.write_metrics_csv(&run_dir.join("metrics.csv"))?;
    report.write_confusion_csvs(run_dir)?;
    Ok(())
}

/// Re-evaluates a finished run from its checkpoint and stored split,
/// rewriting the report files.
pub fn evaluate_run(
    manifest: &Manifest,
    cfg: &ExperimentConfig,
    run_dir: &Path,
) -> Result<EvalReport, RunError> {
    let model_path = run_dir.join(MODEL_FILE);
    let model = load_checkpoint(&model_path)?;
    let sidecar: ModelSidecar = read_json(&model_path.with_extension("json"))?;
    if sidecar.class_names != manifest.class_names {
        return Err(RunError::Artifact(format!(
            "model classes {:?} differ from manifest classes {:?}",
            sidecar.class_names, manifest.class_names
        )));
    }
    let split: Split = read_json(&run_dir.join(SPLIT_FILE))?;
    let test_only = Split {
        train: Vec::new(),
        test: split.test,
    };
    let cache = FeatureCache::new(
        &cfg.cache_dir,
        crate::features::FeatureConfig {
            max_frames: sidecar.max_frames,
            ..Default::default()
        },
    )?;
    let by_id: std::collections::HashSet<&str> =
        test_only.test.iter().map(String::as_str).collect();
    let utterances: Vec<_> = manifest
        .utterances()
        .into_iter()
        .filter(|u| by_id.contains(u.id.as_str()))
        .collect();
    let mut test: Vec<WindowTestSet> = Vec::new();
    for window in &sidecar.windows {
        let mut examples = Vec::new();
        for u in &utterances {
            let features = cache.get_or_compute(&u.id, &u.audio_path, window)?;
            examples.push(crate::augment::Example {
                features,
                label: u.label,
            });
        }
        test.push(WindowTestSet {
            window: *window,
            examples,
        });
    }
    let report = with_threads(cfg.deterministic, || {
        multiwindow_evaluate(
            &model,
            &test,
            sidecar.normalization.as_ref(),
            &sidecar.class_names,
        )
    })??;
    write_report(&report, run_dir)?;
    Ok(report)
}

//! Window-subset sweep: one full experiment per non-empty subset.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::manifest::Manifest;
use super::runner::{
    extract_features, io_err, open_cache, read_json, run_experiment_with_cache, write_json,
    RunError, REPORT_FILE,
};
use crate::features::FeatureCache;
use crate::train_eval::{EvalReport, Metrics};

pub const SWEEP_JSON: &str = "sweep.json";
pub const SWEEP_CSV: &str = "sweep.csv";

/// All non-empty subsets of `windows`, smallest first, then in
/// lexicographic order of their indices.
pub fn window_subsets(windows: &[f64]) -> Vec<Vec<f64>> {
    let n = windows.len();
    let mut masks: Vec<Vec<usize>> = (1u32..(1 << n))
        .map(|m| (0..n).filter(|&i| m & (1 << i) != 0).collect())
        .collect();
    masks.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    masks
        .into_iter()
        .map(|idx| idx.into_iter().map(|i| windows[i]).collect())
        .collect()
}

/// `w` followed by the 1-based positions of the subset's windows in `all`.
pub fn subset_id(all: &[f64], subset: &[f64]) -> String {
    let mut id = String::from("w");
    for (i, w) in all.iter().enumerate() {
        if subset.contains(w) {
            id.push_str(&(i + 1).to_string());
        }
    }
    id
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetResult {
    pub subset_id: String,
    pub windows_ms: Vec<f64>,
    pub best_window_ms: f64,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub mean_ua: f64,
    /// `None` when the subset was resumed from an earlier run.
    pub train_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub windows_ms: Vec<f64>,
    pub subsets: Vec<SubsetResult>,
}

fn result_from(
    id: String,
    windows: Vec<f64>,
    report: &EvalReport,
    secs: Option<f64>,
) -> SubsetResult {
    SubsetResult {
        subset_id: id,
        windows_ms: windows,
        best_window_ms: report.best_window_ms,
        metrics: report.metrics,
        mean_ua: report.mean_ua,
        train_seconds: secs,
    }
}

/// Runs every subset of `cfg.windows_ms` under `out_dir/<subset id>/`,
/// reusing one feature cache. Subsets that already have a report are
/// read back instead of retrained.
pub fn run_sweep(
    manifest: &Manifest,
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<SweepSummary, RunError> {
    run_sweep_with_cache(manifest, cfg, out_dir, &open_cache(cfg)?)
}

pub fn run_sweep_with_cache(
    manifest: &Manifest,
    cfg: &ExperimentConfig,
    out_dir: &Path,
    cache: &FeatureCache,
) -> Result<SweepSummary, RunError> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let subsets = window_subsets(&cfg.windows_ms);
    let run_one = |subset: &Vec<f64>| -> Result<SubsetResult, RunError> {
        let id = subset_id(&cfg.windows_ms, subset);
        let dir = out_dir.join(&id);
        let report_path = dir.join(REPORT_FILE);
        if report_path.exists() {
            log::info!("{id}: found existing report, skipping");
            let report: EvalReport = read_json(&report_path)?;
            return Ok(result_from(id, subset.clone(), &report, None));
        }
        log::info!("{id}: windows {subset:?}");
        let sub_cfg = ExperimentConfig {
            windows_ms: subset.clone(),
            ..cfg.clone()
        };
        let start = Instant::now();
        let outcome = run_experiment_with_cache(manifest, &sub_cfg, &dir, cache)?;
        Ok(result_from(
            id,
            subset.clone(),
            &outcome.report,
            Some(start.elapsed().as_secs_f64()),
        ))
    };
    let results: Result<Vec<_>, _> = if cfg.parallel_subsets {
        // fill the cache first so concurrent runs never extract the same matrix twice
        extract_features(manifest, cfg, out_dir, cache)?;
        subsets.par_iter().map(run_one).collect()
    } else {
        subsets.iter().map(run_one).collect()
    };
    let summary = SweepSummary {
        windows_ms: cfg.windows_ms.clone(),
        subsets: results?,
    };
    write_sweep(&summary, out_dir)?;
    Ok(summary)
}

pub fn write_sweep(summary: &SweepSummary, out_dir: &Path) -> Result<(), RunError> {
    write_json(&out_dir.join(SWEEP_JSON), summary)?;
    let path: PathBuf = out_dir.join(SWEEP_CSV);
    fs::write(&path, sweep_csv(summary)).map_err(io_err(&path))
}

/// Rows UA, WAP, WAF1; one column per subset.
pub fn sweep_csv(summary: &SweepSummary) -> String {
    let mut out = String::from("metric");
    for s in &summary.subsets {
        out.push(',');
        out.push_str(&s.subset_id);
    }
    out.push('\n');
    for (i, name) in ["UA", "WAP", "WAF1"].into_iter().enumerate() {
        out.push_str(name);
        for s in &summary.subsets {
            out.push_str(&format!(",{:.6}", s.metrics.headline()[i].1));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifteen_subsets_in_order() {
        let w = [25.0, 50.0, 100.0, 200.0];
        let ids: Vec<String> = window_subsets(&w)
            .iter()
            .map(|s| subset_id(&w, s))
            .collect();
        assert_eq!(
            ids,
            [
                "w1", "w2", "w3", "w4", "w12", "w13", "w14", "w23", "w24", "w34", "w123", "w124",
                "w134", "w234", "w1234"
            ]
        );
    }

    #[test]
    fn csv_layout() {
        let m = Metrics {
            ua: 0.5,
            wap: 0.25,
            waf1: 0.125,
            accuracy: 0.5,
        };
        let summary = SweepSummary {
            windows_ms: vec![25.0, 50.0],
            subsets: vec![
                result_from_parts("w1", m),
                result_from_parts("w2", m),
                result_from_parts("w12", m),
            ],
        };
        let csv = sweep_csv(&summary);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "metric,w1,w2,w12");
        assert_eq!(lines[1], "UA,0.500000,0.500000,0.500000");
        assert_eq!(lines[3], "WAF1,0.125000,0.125000,0.125000");
    }

    fn result_from_parts(id: &str, metrics: Metrics) -> SubsetResult {
        SubsetResult {
            subset_id: id.into(),
            windows_ms: vec![],
            best_window_ms: 25.0,
            metrics,
            mean_ua: metrics.ua,
            train_seconds: None,
        }
    }
}

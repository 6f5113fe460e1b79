use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{ConfusionMatrix, Metrics};
use super::trainer::{batch_tensor, check_examples};
use super::TrainError;
use crate::augment::{Example, WindowTestSet};
use crate::features::ColumnStats;
use crate::nn::CnnModel;

const EVAL_BATCH: usize = 32;

/// Arg-max predictions for every example, tallied against the labels.
pub fn evaluate(
    model: &CnnModel,
    test: &[Example],
    norm: Option<&ColumnStats>,
) -> Result<ConfusionMatrix, TrainError> {
    if test.is_empty() {
        return Err(TrainError::EmptyTestSet);
    }
    check_examples(model, test)?;
    let mut confusion = ConfusionMatrix::new(model.classes());
    for chunk in test.chunks(EVAL_BATCH) {
        let predicted = model.predict(batch_tensor(chunk, norm))?;
        for (e, p) in chunk.iter().zip(predicted) {
            confusion.add(e.label, p);
        }
    }
    Ok(confusion)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    pub window_ms: f64,
    pub n_test: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub confusion: Vec<Vec<u64>>,
}

/// Results over every test window; the headline numbers are those of the
/// window with the highest UA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub class_names: Vec<String>,
    pub best_window_ms: f64,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub confusion: Vec<Vec<u64>>,
    /// Mean UA over all windows, a figure free of test-set window selection.
    pub mean_ua: f64,
    pub per_window: Vec<WindowResult>,
}

/// Evaluates each window's test set (in parallel) and picks the best window
/// by UA; ties go to the smaller window.
pub fn multiwindow_evaluate(
    model: &CnnModel,
    test: &[WindowTestSet],
    norm: Option<&ColumnStats>,
    class_names: &[String],
) -> Result<EvalReport, TrainError> {
    if test.is_empty() {
        return Err(TrainError::NoWindows);
    }
    let sizes: Vec<usize> = test.iter().map(|t| t.examples.len()).collect();
    if sizes.iter().any(|&s| s != sizes[0]) {
        return Err(TrainError::UnequalTestSets(sizes));
    }
    let per_window: Vec<WindowResult> = test
        .par_iter()
        .map(|t| {
            let confusion = evaluate(model, &t.examples, norm)?;
            Ok(WindowResult {
                window_ms: t.window.width_ms,
                n_test: t.examples.len(),
                metrics: confusion.metrics(),
                confusion: confusion.rows(),
            })
        })
        .collect::<Result<_, TrainError>>()?;
    let best = select_best(&per_window).expect("at least one window");
    Ok(EvalReport {
        class_names: class_names.to_vec(),
        best_window_ms: best.window_ms,
        metrics: best.metrics,
        confusion: best.confusion.clone(),
        mean_ua: per_window.iter().map(|w| w.metrics.ua).sum::<f64>() / per_window.len() as f64,
        per_window: per_window.clone(),
    })
}

/// Highest UA; ties go to the smaller window.
pub fn select_best(results: &[WindowResult]) -> Option<&WindowResult> {
    results.iter().reduce(|a, b| {
        let b_wins = b.metrics.ua > a.metrics.ua
            || (b.metrics.ua == a.metrics.ua && b.window_ms < a.window_ms);
        if b_wins {
            b
        } else {
            a
        }
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn window_tag(ms: f64) -> String {
    format!("{ms}ms")
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn write_json(&self, path: &Path) -> Result<(), TrainError> {
        fs::write(path, self.to_json()).map_err(io_err(path))
    }

    /// One row per window plus a `best` row.
    pub fn write_metrics_csv(&self, path: &Path) -> Result<(), TrainError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["window", "n_test", "ua", "wap", "waf1", "accuracy"])?;
        let mut row = |name: String, n: usize, m: &Metrics| {
            w.write_record([
                name,
                n.to_string(),
                format!("{:.6}", m.ua),
                format!("{:.6}", m.wap),
                format!("{:.6}", m.waf1),
                format!("{:.6}", m.accuracy),
            ])
        };
        for r in &self.per_window {
            row(window_tag(r.window_ms), r.n_test, &r.metrics)?;
        }
        let n = self.per_window.first().map_or(0, |r| r.n_test);
        row(
            format!("best ({})", window_tag(self.best_window_ms)),
            n,
            &self.metrics,
        )?;
        w.flush().map_err(io_err(path))
    }

    /// `confusion_<w>ms.csv` per window and `confusion_best.csv`; returns the paths.
    pub fn write_confusion_csvs(&self, dir: &Path) -> Result<Vec<PathBuf>, TrainError> {
        let mut written = Vec::new();
        let grids = self
            .per_window
            .iter()
            .map(|r| {
                (
                    format!("confusion_{}.csv", window_tag(r.window_ms)),
                    &r.confusion,
                )
            })
            .chain(std::iter::once((
                "confusion_best.csv".to_string(),
                &self.confusion,
            )));
        for (name, grid) in grids {
            let path = dir.join(name);
            write_confusion_csv(&path, &self.class_names, grid)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Heat-map friendly grid: header of predicted class names, one row per true class.
pub fn write_confusion_csv(
    path: &Path,
    class_names: &[String],
    grid: &[Vec<u64>],
) -> Result<(), TrainError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["true\\predicted".to_string()];
    header.extend(class_names.iter().cloned());
    w.write_record(&header)?;
    for (name, row) in class_names.iter().zip(grid) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(u64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::WindowSpec;
    use crate::nn::Architecture;
    use crate::synthetic::separable_examples;

    fn results(uas: &[(f64, f64)]) -> Vec<WindowResult> {
        uas.iter()
            .map(|&(w, ua)| WindowResult {
                window_ms: w,
                n_test: 10,
                metrics: Metrics {
                    ua,
                    wap: 0.0,
                    waf1: 0.0,
                    accuracy: 0.0,
                },
                confusion: vec![],
            })
            .collect()
    }

    #[test]
    fn selection_rule_examples() {
        let r = results(&[(25.0, 0.60), (50.0, 0.64), (100.0, 0.62)]);
        let best = select_best(&r).unwrap();
        assert_eq!((best.window_ms, best.metrics.ua), (50.0, 0.64));
        assert_eq!(
            select_best(&results(&[(50.0, 0.5), (25.0, 0.5)]))
                .unwrap()
                .window_ms,
            25.0
        );
        assert_eq!(
            select_best(&results(&[(25.0, 0.5), (50.0, 0.5)]))
                .unwrap()
                .window_ms,
            25.0
        );
        assert!(select_best(&[]).is_none());
    }

    fn window_sets(windows: &[f64]) -> Vec<WindowTestSet> {
        windows
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let mut examples = separable_examples(2, 2, i as u64);
                for e in &mut examples {
                    let values = e.features.values()[..8 * 34].to_vec();
                    let meta = e.features.meta.clone();
                    e.features =
                        crate::features::FeatureMatrix::from_values(8, values, meta).unwrap();
                }
                WindowTestSet {
                    window: WindowSpec::half_overlap(w).unwrap(),
                    examples,
                }
            })
            .collect()
    }

    fn model() -> CnnModel {
        CnnModel::new(Architecture::tiny(2).with_input(8, 34), 1).unwrap()
    }

    #[test]
    fn multiwindow_report_invariants() {
        let names = vec!["a".to_string(), "b".to_string()];
        let sets = window_sets(&[25.0, 50.0, 100.0]);
        let r = multiwindow_evaluate(&model(), &sets, None, &names).unwrap();
        assert_eq!(r.per_window.len(), 3);
        let max = r
            .per_window
            .iter()
            .map(|w| w.metrics.ua)
            .fold(f64::MIN, f64::max);
        assert_eq!(r.metrics.ua, max);
        for w in &r.per_window {
            assert_eq!(w.confusion.iter().flatten().sum::<u64>(), 4);
            for (c, row) in w.confusion.iter().enumerate() {
                assert_eq!(row.iter().sum::<u64>(), 2, "class {c} support");
            }
        }
        let back = EvalReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn single_window_headline() {
        let names = vec!["a".to_string(), "b".to_string()];
        let sets = window_sets(&[25.0]);
        let r = multiwindow_evaluate(&model(), &sets, None, &names).unwrap();
        assert_eq!(r.metrics, r.per_window[0].metrics);
        assert_eq!(r.mean_ua, r.metrics.ua);
    }

    #[test]
    fn evaluation_errors() {
        let names = vec!["a".to_string(), "b".to_string()];
        assert!(matches!(
            multiwindow_evaluate(&model(), &[], None, &names),
            Err(TrainError::NoWindows)
        ));
        let mut sets = window_sets(&[25.0, 50.0]);
        sets[1].examples.pop();
        assert!(matches!(
            multiwindow_evaluate(&model(), &sets, None, &names),
            Err(TrainError::UnequalTestSets(_))
        ));
        assert!(matches!(
            evaluate(&model(), &[], None),
            Err(TrainError::EmptyTestSet)
        ));
    }

    #[test]
    fn csv_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let names = vec!["a".to_string(), "b".to_string()];
        let r = multiwindow_evaluate(&model(), &window_sets(&[25.0, 50.0]), None, &names).unwrap();
        r.write_metrics_csv(&dir.path().join("metrics.csv"))
            .unwrap();
        let text = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("window,n_test,ua,wap,waf1,accuracy\n25ms,4,"));
        let paths = r.write_confusion_csvs(dir.path()).unwrap();
        assert_eq!(paths.len(), 3);
        let grid = fs::read_to_string(&paths[0]).unwrap();
        assert!(grid.starts_with("true\\predicted,a,b\na,"));
    }
}

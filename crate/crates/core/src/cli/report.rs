//! Comparison tables over finished runs.

use std::fs;
use std::path::{Path, PathBuf};

use super::runner::{io_err, read_json, RunError, REPORT_FILE};
use super::sweep::subset_id;
use crate::train_eval::{EvalReport, Metrics};

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub windows_ms: Vec<f64>,
    pub best_window_ms: f64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tables {
    pub runs: Vec<RunSummary>,
    pub comparison_csv: String,
    pub comparison_text: String,
    pub grid_csv: String,
    pub grid_text: String,
}

/// Every `report.json` in `dir` or its immediate subdirectories.
pub fn collect_runs(dir: &Path) -> Result<Vec<RunSummary>, RunError> {
    if !dir.is_dir() {
        return Err(RunError::NoResults(dir.to_path_buf()));
    }
    let mut dirs = vec![dir.to_path_buf()];
    let mut children: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    children.sort();
    dirs.extend(children);
    let mut runs = Vec::new();
    for d in dirs {
        let path = d.join(REPORT_FILE);
        if !path.exists() {
            continue;
        }
        let report: EvalReport = read_json(&path)?;
        let mut windows_ms: Vec<f64> = report.per_window.iter().map(|w| w.window_ms).collect();
        windows_ms.sort_by(f64::total_cmp);
        runs.push(RunSummary {
            dir: d,
            windows_ms,
            best_window_ms: report.best_window_ms,
            metrics: report.metrics,
        });
    }
    if runs.is_empty() {
        return Err(RunError::NoResults(dir.to_path_buf()));
    }
    Ok(runs)
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

fn windows_label(w: &[f64]) -> String {
    w.iter()
        .map(|x| format!("{x}"))
        .collect::<Vec<_>>()
        .join("+")
        + " ms"
}

/// Left-aligned first column, right-aligned others.
fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(String::len)
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for r in rows {
        let cells: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn to_csv(rows: &[Vec<String>]) -> String {
    rows.iter().map(|r| r.join(",") + "\n").collect()
}

/// Single-window baseline (smallest window) against the multi-window run
/// with the highest UA. Either row is omitted when no such run exists.
pub fn comparison_rows(runs: &[RunSummary]) -> Vec<Vec<String>> {
    let single = runs
        .iter()
        .filter(|r| r.windows_ms.len() == 1)
        .min_by(|a, b| a.windows_ms[0].total_cmp(&b.windows_ms[0]));
    let multi = runs
        .iter()
        .filter(|r| r.windows_ms.len() > 1)
        .max_by(|a, b| {
            a.metrics
                .ua
                .total_cmp(&b.metrics.ua)
                .then(b.windows_ms.len().cmp(&a.windows_ms.len()))
        });
    let mut rows = vec![vec![
        "model".into(),
        "windows".into(),
        "UA (%)".into(),
        "WAP (%)".into(),
        "WAF1 (%)".into(),
    ]];
    for (name, run) in [("single-window", single), ("multi-window", multi)] {
        if let Some(r) = run {
            rows.push(vec![
                name.into(),
                windows_label(&r.windows_ms),
                pct(r.metrics.ua),
                pct(r.metrics.wap),
                pct(r.metrics.waf1),
            ]);
        }
    }
    rows
}

/// Metrics down, window subsets across, ordered as the sweep enumerates them.
pub fn grid_rows(runs: &[RunSummary]) -> Vec<Vec<String>> {
    let mut all: Vec<f64> = runs
        .iter()
        .flat_map(|r| r.windows_ms.iter().copied())
        .collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let mut ordered: Vec<&RunSummary> = runs.iter().collect();
    let position = |r: &RunSummary| -> Vec<usize> {
        r.windows_ms
            .iter()
            .map(|w| all.iter().position(|x| x == w).unwrap_or(usize::MAX))
            .collect()
    };
    ordered.sort_by(|a, b| {
        a.windows_ms
            .len()
            .cmp(&b.windows_ms.len())
            .then_with(|| position(a).cmp(&position(b)))
    });
    ordered.dedup_by(|a, b| a.windows_ms == b.windows_ms);
    let mut header = vec!["metric".to_string()];
    header.extend(ordered.iter().map(|r| subset_id(&all, &r.windows_ms)));
    let mut rows = vec![header];
    for (i, name) in ["UA", "WAP", "WAF1"].into_iter().enumerate() {
        let mut row = vec![name.to_string()];
        row.extend(ordered.iter().map(|r| pct(r.metrics.headline()[i].1)));
        rows.push(row);
    }
    rows
}

/// Builds both tables from the runs under `dir` and writes
/// `comparison.{csv,txt}` and `grid.{csv,txt}` there.
pub fn render_report(dir: &Path) -> Result<Tables, RunError> {
    let runs = collect_runs(dir)?;
    let comparison = comparison_rows(&runs);
    let grid = grid_rows(&runs);
    let tables = Tables {
        comparison_csv: to_csv(&comparison),
        comparison_text: align(&comparison),
        grid_csv: to_csv(&grid),
        grid_text: align(&grid),
        runs,
    };
    for (name, text) in [
        ("comparison.csv", &tables.comparison_csv),
        ("comparison.txt", &tables.comparison_text),
        ("grid.csv", &tables.grid_csv),
        ("grid.txt", &tables.grid_text),
    ] {
        let path = dir.join(name);
        fs::write(&path, text).map_err(io_err(&path))?;
    }
    Ok(tables)
}

//! End to end on a generated tone corpus: manifest, multi-window training, per-window evaluation.

use mwa_ser::cli::{ingest_manifest, render_report, run_experiment, ExperimentConfig, Protocol};
use mwa_ser::synthetic::{write_manifest, write_tone_corpus, CorpusSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let dir = tempfile::tempdir()?;
    let spec = CorpusSpec {
        per_class: 8,
        seconds: 0.8,
        ..CorpusSpec::default()
    };
    let utts = write_tone_corpus(&dir.path().join("wav"), &spec)?;
    let manifest_path = dir.path().join("manifest.csv");
    write_manifest(&manifest_path, &utts, &spec.class_names())?;
    let manifest = ingest_manifest(&manifest_path, Protocol::Custom)?;

    let cfg = ExperimentConfig {
        windows_ms: vec![25.0, 100.0],
        epochs: 15,
        batch_size: 16,
        cache_dir: dir.path().join("cache"),
        ..ExperimentConfig::default()
    };
    let run_dir = dir.path().join("run");
    let outcome = run_experiment(&manifest, &cfg, &run_dir)?;
    for w in &outcome.report.per_window {
        println!(
            "{:>5} ms  UA {:.3}  WAF1 {:.3}",
            w.window_ms, w.metrics.ua, w.metrics.waf1
        );
    }
    println!(
        "best {} ms, UA {:.3}; mean UA over windows {:.3}",
        outcome.report.best_window_ms, outcome.report.metrics.ua, outcome.report.mean_ua
    );
    print!("{}", render_report(&run_dir)?.comparison_text);
    Ok(())
}

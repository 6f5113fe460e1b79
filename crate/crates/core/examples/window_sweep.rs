//! Every non-empty subset of the configured windows, trained and scored separately.

use mwa_ser::cli::{
    ingest_manifest, render_report, run_sweep, window_subsets, ExperimentConfig, Protocol,
};
use mwa_ser::synthetic::{write_manifest, write_tone_corpus, CorpusSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let windows = vec![25.0, 50.0, 100.0, 200.0];
    println!(
        "{} subsets of {:?}",
        window_subsets(&windows).len(),
        windows
    );

    let dir = tempfile::tempdir()?;
    let spec = CorpusSpec {
        per_class: 4,
        seconds: 0.6,
        ..CorpusSpec::default()
    };
    let utts = write_tone_corpus(&dir.path().join("wav"), &spec)?;
    let manifest_path = dir.path().join("manifest.csv");
    write_manifest(&manifest_path, &utts, &spec.class_names())?;
    let manifest = ingest_manifest(&manifest_path, Protocol::Custom)?;

    let cfg = ExperimentConfig {
        windows_ms: windows,
        epochs: 2,
        batch_size: 8,
        cache_dir: dir.path().join("cache"),
        ..ExperimentConfig::default()
    };
    let out = dir.path().join("sweep");
    let summary = run_sweep(&manifest, &cfg, &out)?;
    for s in &summary.subsets {
        println!(
            "{:<6} UA {:.3}  {:.1} s",
            s.subset_id,
            s.metrics.ua,
            s.train_seconds.unwrap_or(0.0)
        );
    }
    print!("{}", render_report(&out)?.grid_text);
    Ok(())
}

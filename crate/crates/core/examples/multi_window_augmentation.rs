//! Build a multi-window training set: every utterance contributes one matrix per window.

use mwa_ser::augment::{build_augmented_dataset, AugmentOptions, LabeledUtterance, Split};
use mwa_ser::dsp::WindowSpec;
use mwa_ser::features::{FeatureCache, FeatureConfig};
use mwa_ser::synthetic::{write_tone_corpus, CorpusSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let spec = CorpusSpec {
        per_class: 5,
        seconds: 0.6,
        ..CorpusSpec::default()
    };
    let utts = write_tone_corpus(&dir.path().join("wav"), &spec)?;
    let labeled: Vec<LabeledUtterance> = utts
        .iter()
        .map(|u| LabeledUtterance {
            id: u.id.clone(),
            audio_path: u.path.clone(),
            label: u.label,
        })
        .collect();
    let split = Split {
        train: labeled.iter().skip(4).map(|u| u.id.clone()).collect(),
        test: labeled.iter().take(4).map(|u| u.id.clone()).collect(),
    };
    let cache = FeatureCache::new(dir.path().join("cache"), FeatureConfig::default())?;

    let mut windows = Vec::new();
    for ms in [25.0, 50.0, 100.0, 200.0] {
        windows.push(WindowSpec::half_overlap(ms)?);
        let ds = build_augmented_dataset(
            &labeled,
            &spec.class_names(),
            &split,
            &windows,
            &cache,
            AugmentOptions::default(),
        )?;
        println!(
            "{} window(s): {} train utterances -> {} train examples, {} test sets of {}",
            windows.len(),
            ds.train_utterances(),
            ds.train.len(),
            ds.test.len(),
            ds.test[0].examples.len()
        );
    }
    println!(
        "cache: {} hits, {} extractions",
        cache.hits(),
        cache.misses()
    );
    Ok(())
}

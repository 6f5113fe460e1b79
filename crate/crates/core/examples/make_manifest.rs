//! Label a RAVDESS-style directory from its file names and load it under the six-class protocol.

use mwa_ser::audio_io::{write_wav, SampleFormat};
use mwa_ser::cli::{ingest_manifest, scan_corpus, write_corpus_manifest, CorpusLayout, Protocol};
use mwa_ser::synthetic::class_tone;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for actor in 1..=2 {
        let actor_dir = dir.path().join(format!("Actor_{actor:02}"));
        std::fs::create_dir_all(&actor_dir)?;
        for emotion in 1..=8 {
            // channel 01 is speech, 02 is song
            for channel in [1, 2] {
                let name = format!("03-{channel:02}-{emotion:02}-01-01-01-{actor:02}.wav");
                let buf = class_tone(emotion % 6, 16_000, 0.2, &mut rng);
                write_wav(actor_dir.join(name), &buf, SampleFormat::Pcm16)?;
            }
        }
    }

    let entries = scan_corpus(dir.path(), CorpusLayout::Ravdess)?;
    let csv = dir.path().join("ravdess.csv");
    write_corpus_manifest(&csv, &entries)?;
    println!(
        "{}",
        std::fs::read_to_string(&csv)?
            .lines()
            .take(4)
            .collect::<Vec<_>>()
            .join("\n")
    );

    let manifest = ingest_manifest(&csv, Protocol::Ravdess6)?;
    println!("classes {:?}", manifest.class_names);
    println!("counts  {:?}", manifest.class_counts());
    println!("excluded {:?}", manifest.excluded);
    Ok(())
}

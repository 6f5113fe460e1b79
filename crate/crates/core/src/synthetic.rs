//! Deterministic synthetic data: tone corpora on disk and separable feature
//! matrices, for tests, examples and smoke runs without licensed audio.

use std::f64::consts::PI;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio_io::{write_wav, AudioBuffer, SampleFormat};
use crate::augment::Example;
use crate::dsp::WindowSpec;
use crate::features::{FeatureMatrix, FeatureMeta, DEFAULT_MAX_FRAMES, N_FEATURES};

const NAMES: [&str; 6] = ["angry", "happy", "neutral", "sad", "fear", "disgust"];

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub classes: usize,
    pub per_class: usize,
    pub seconds: f64,
    pub sample_rate: u32,
    pub speakers: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            classes: 4,
            per_class: 6,
            seconds: 1.0,
            sample_rate: 16_000,
            speakers: 2,
            seed: 0,
        }
    }
}

impl CorpusSpec {
    /// Emotion-style names for up to six classes, `classN` beyond.
    pub fn class_names(&self) -> Vec<String> {
        (0..self.classes)
            .map(|c| {
                NAMES
                    .get(c)
                    .map_or_else(|| format!("class{c}"), |s| s.to_string())
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticUtterance {
    pub id: String,
    pub path: PathBuf,
    pub label: usize,
    pub speaker: String,
}

/// A harmonic tone whose pitch, brightness and tremolo rate depend on the class.
pub fn class_tone(class: usize, sample_rate: u32, seconds: f64, rng: &mut impl Rng) -> AudioBuffer {
    let n = (seconds * sample_rate as f64).round() as usize;
    let f0 = 140.0 * 1.6f64.powi(class as i32) * rng.random_range(0.97..1.03);
    let tremolo = 2.0 + 1.5 * class as f64;
    let harmonics = 1 + class % 4;
    let phase: f64 = rng.random_range(0.0..2.0 * PI);
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate as f64;
            let tone: f64 = (1..=harmonics)
                .map(|h| (2.0 * PI * f0 * h as f64 * t + phase).sin() / h as f64)
                .sum();
            let env = 0.6 + 0.4 * (2.0 * PI * tremolo * t).sin();
            0.5 * env * tone + 0.01 * rng.random_range(-1.0..1.0)
        })
        .collect();
    AudioBuffer::new(samples, sample_rate).expect("non-zero sample rate")
}

/// Writes `classes × per_class` 16-bit WAV files under `dir`.
pub fn write_tone_corpus(dir: &Path, spec: &CorpusSpec) -> io::Result<Vec<SyntheticUtterance>> {
    fs::create_dir_all(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let names = spec.class_names();
    let mut out = Vec::new();
    for i in 0..spec.per_class {
        for (label, name) in names.iter().enumerate() {
            let id = format!("{name}_{i:03}");
            let path = dir.join(format!("{id}.wav"));
            let buf = class_tone(label, spec.sample_rate, spec.seconds, &mut rng);
            write_wav(&path, &buf, SampleFormat::Pcm16).map_err(io::Error::other)?;
            out.push(SyntheticUtterance {
                id,
                path,
                label,
                speaker: format!("spk{}", i % spec.speakers.max(1)),
            });
        }
    }
    Ok(out)
}

/// Manifest CSV (`utterance_id,audio_path,label,speaker`) with paths relative to the CSV.
pub fn write_manifest(
    path: &Path,
    utterances: &[SyntheticUtterance],
    class_names: &[String],
) -> io::Result<()> {
    let base = path.parent().unwrap_or(Path::new(""));
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["utterance_id", "audio_path", "label", "speaker"])?;
    for u in utterances {
        let rel = u.path.strip_prefix(base).unwrap_or(&u.path);
        w.write_record([
            u.id.as_str(),
            &rel.to_string_lossy(),
            class_names[u.label].as_str(),
            u.speaker.as_str(),
        ])?;
    }
    w.flush()
}

/// `classes × per_class` full-size matrices: Gaussian-ish noise plus a
/// class-specific block pattern, linearly separable by construction.
pub fn separable_examples(classes: usize, per_class: usize, seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let window = WindowSpec::half_overlap(25.0).expect("valid window");
    let mut out = Vec::new();
    for i in 0..per_class {
        for label in 0..classes {
            let values: Vec<f32> = (0..DEFAULT_MAX_FRAMES * N_FEATURES)
                .map(|k| {
                    let (r, c) = (k / N_FEATURES, k % N_FEATURES);
                    let on = (r / 25 + c / 5) % classes == label;
                    let noise: f64 = rng.random_range(-0.5..0.5);
                    (noise + if on { 1.0 } else { 0.0 }) as f32
                })
                .collect();
            let meta = FeatureMeta {
                utterance_id: format!("syn{label}_{i}"),
                source_path: String::new(),
                sample_rate: 16_000,
                window,
                frame_count: DEFAULT_MAX_FRAMES,
                warnings: Vec::new(),
            };
            out.push(Example {
                features: FeatureMatrix::from_values(DEFAULT_MAX_FRAMES, values, meta)
                    .expect("sized"),
                label,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio_io::read_wav;

    #[test]
    fn corpus_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let spec = CorpusSpec {
            per_class: 2,
            seconds: 0.2,
            ..CorpusSpec::default()
        };
        let ua = write_tone_corpus(a.path(), &spec).unwrap();
        let ub = write_tone_corpus(b.path(), &spec).unwrap();
        assert_eq!(ua.len(), 8);
        for (x, y) in ua.iter().zip(&ub) {
            assert_eq!(fs::read(&x.path).unwrap(), fs::read(&y.path).unwrap());
        }
        assert_eq!(read_wav(&ua[0].path).unwrap().len(), 3200);
    }

    #[test]
    fn manifest_paths_are_relative() {
        let dir = tempfile::tempdir().unwrap();
        let spec = CorpusSpec {
            classes: 2,
            per_class: 1,
            seconds: 0.1,
            ..CorpusSpec::default()
        };
        let utts = write_tone_corpus(&dir.path().join("wav"), &spec).unwrap();
        let path = dir.path().join("manifest.csv");
        write_manifest(&path, &utts, &spec.class_names()).unwrap();
        let text = fs::read_to_string(path).unwrap();
        assert!(text.starts_with("utterance_id,audio_path,label,speaker\n"));
        assert!(text.contains("angry_000,wav/angry_000.wav,angry,spk0"));
    }

    #[test]
    fn separable_examples_shape() {
        let ex = separable_examples(4, 4, 1);
        assert_eq!(ex.len(), 16);
        assert!(ex.iter().all(|e| e.features.rows() == 200));
        assert_eq!(ex.iter().filter(|e| e.label == 3).count(), 4);
    }
}

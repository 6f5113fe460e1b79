//! The 34-dimensional short-term feature set and fixed-size feature matrices.
//!
//! Per frame, in column order:
//!
//! | cols   | feature                                 |
//! |--------|-----------------------------------------|
//! | 0      | zero-crossing rate                      |
//! | 1      | short-term energy                       |
//! | 2      | entropy of energy                       |
//! | 3, 4   | spectral centroid, spectral spread      |
//! | 5      | spectral entropy                        |
//! | 6      | spectral flux                           |
//! | 7      | spectral rolloff                        |
//! | 8..21  | MFCC 0..12                              |
//! | 21..33 | chroma classes A..G#                    |
//! | 33     | standard deviation of the chroma vector |
//!
//! All features are computed on the windowed frame. An utterance is reduced to
//! its first `max_frames` frames; shorter utterances are zero-padded.

pub mod cache;
mod chroma;
mod mfcc;
mod spectral;
mod temporal;

pub use cache::{FeatureCache, CACHE_MAGIC, CACHE_VERSION};
pub use chroma::{chroma, pitch_class, ChromaMap};
pub use mfcc::{hz_to_mel, mel_to_hz, mfcc, MelFilterbank};
pub use spectral::{spectral_centroid_spread, spectral_entropy, spectral_flux, spectral_rolloff};
pub use temporal::{energy_entropy, short_term_energy, zero_crossing_rate};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::{AudioBuffer, AudioError};
use crate::dsp::{frames, DspError, Spectrum, SpectrumAnalyzer, WindowSpec};

/// Floor used wherever a denominator or logarithm argument could vanish.
pub const EPS: f64 = 1e-10;

pub const N_FEATURES: usize = 34;
pub const DEFAULT_MAX_FRAMES: usize = 200;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "zcr",
    "energy",
    "energy_entropy",
    "spectral_centroid",
    "spectral_spread",
    "spectral_entropy",
    "spectral_flux",
    "spectral_rolloff",
    "mfcc_1",
    "mfcc_2",
    "mfcc_3",
    "mfcc_4",
    "mfcc_5",
    "mfcc_6",
    "mfcc_7",
    "mfcc_8",
    "mfcc_9",
    "mfcc_10",
    "mfcc_11",
    "mfcc_12",
    "mfcc_13",
    "chroma_1",
    "chroma_2",
    "chroma_3",
    "chroma_4",
    "chroma_5",
    "chroma_6",
    "chroma_7",
    "chroma_8",
    "chroma_9",
    "chroma_10",
    "chroma_11",
    "chroma_12",
    "chroma_std",
];

pub const COL_ZCR: usize = 0;
pub const COL_ENERGY: usize = 1;
pub const COL_ENERGY_ENTROPY: usize = 2;
pub const COL_CENTROID: usize = 3;
pub const COL_SPREAD: usize = 4;
pub const COL_SPECTRAL_ENTROPY: usize = 5;
pub const COL_FLUX: usize = 6;
pub const COL_ROLLOFF: usize = 7;
pub const COL_MFCC: usize = 8;
pub const COL_CHROMA: usize = 21;
pub const COL_CHROMA_STD: usize = 33;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("frame too short: need {needed} samples, got {got}")]
    FrameTooShort { needed: usize, got: usize },
    #[error("spectrum too short: need {needed} bins, got {got}")]
    SpectrumTooShort { needed: usize, got: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("feature cache: {0}")]
    Cache(String),
    #[error("feature cache I/O on {path}: {source}")]
    CacheIo {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Base-2 Shannon entropy with `0·log 0 = 0`.
pub(crate) fn entropy_bits(probs: impl Iterator<Item = f64>) -> f64 {
    -probs
        .filter(|&p| p > 0.0)
        .map(|p| p * p.log2())
        .sum::<f64>()
}

/// Tunables of the feature extractor. Defaults reproduce the 34-feature set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub max_frames: usize,
    pub energy_subframes: usize,
    pub spectral_bands: usize,
    pub rolloff_fraction: f64,
    pub mel_filters: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            max_frames: DEFAULT_MAX_FRAMES,
            energy_subframes: 10,
            spectral_bands: 10,
            rolloff_fraction: 0.90,
            mel_filters: 26,
        }
    }
}

/// Reusable per-(frame length, sample rate) state: FFT plan, mel bank, chroma map.
pub struct FrameFeatures {
    cfg: FeatureConfig,
    sample_rate: u32,
    analyzer: SpectrumAnalyzer,
    mel: MelFilterbank,
    chroma: ChromaMap,
}

impl FrameFeatures {
    pub fn new(
        cfg: &FeatureConfig,
        frame_len: usize,
        sample_rate: u32,
    ) -> Result<Self, FeatureError> {
        let analyzer = SpectrumAnalyzer::for_frame_len(frame_len)?;
        let fft_len = analyzer.fft_len();
        let n_bins = fft_len / 2 + 1;
        Ok(Self {
            mel: MelFilterbank::new(cfg.mel_filters, 13, n_bins, fft_len, sample_rate)?,
            chroma: ChromaMap::new(n_bins, fft_len, sample_rate),
            cfg: cfg.clone(),
            sample_rate,
            analyzer,
        })
    }

    pub fn spectrum(&mut self, frame: &[f64]) -> Result<Spectrum, FeatureError> {
        Ok(self.analyzer.magnitude(frame)?)
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Feature vector of one frame given its spectrum and the previous frame's
    /// spectrum (`None` for the first frame, giving zero flux).
    pub fn vector(
        &self,
        frame: &[f64],
        spectrum: &Spectrum,
        previous: Option<&Spectrum>,
    ) -> Result<[f64; N_FEATURES], FeatureError> {
        let mags = &spectrum.magnitudes;
        let mut v = [0.0; N_FEATURES];
        v[COL_ZCR] = zero_crossing_rate(frame)?;
        v[COL_ENERGY] = short_term_energy(frame)?;
        v[COL_ENERGY_ENTROPY] = energy_entropy(frame, self.cfg.energy_subframes)?;
        let (centroid, spread) = spectral_centroid_spread(mags)?;
        v[COL_CENTROID] = centroid;
        v[COL_SPREAD] = spread;
        v[COL_SPECTRAL_ENTROPY] = spectral_entropy(mags, self.cfg.spectral_bands)?;
        v[COL_FLUX] = match previous {
            Some(p) => spectral_flux(mags, &p.magnitudes)?,
            None => 0.0,
        };
        v[COL_ROLLOFF] = spectral_rolloff(mags, self.cfg.rolloff_fraction)?;
        v[COL_MFCC..COL_CHROMA].copy_from_slice(&self.mel.mfcc(mags)?);
        v[COL_CHROMA..].copy_from_slice(&self.chroma.chroma(mags));
        Ok(v)
    }
}

/// Provenance of a feature matrix; also the JSON sidecar of a cache entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub utterance_id: String,
    pub source_path: String,
    pub sample_rate: u32,
    pub window: WindowSpec,
    /// Frames available in the signal before truncation or padding.
    pub frame_count: usize,
    /// Non-fatal extraction issues, e.g. a signal too short for a single frame.
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// `rows × 34` features for one (utterance, window) pair, stored row-major as `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub meta: FeatureMeta,
    rows: usize,
    values: Vec<f32>,
}

impl FeatureMatrix {
    pub fn zeros(rows: usize, meta: FeatureMeta) -> Self {
        Self {
            meta,
            rows,
            values: vec![0.0; rows * N_FEATURES],
        }
    }

    pub fn from_values(
        rows: usize,
        values: Vec<f32>,
        meta: FeatureMeta,
    ) -> Result<Self, FeatureError> {
        if values.len() != rows * N_FEATURES {
            return Err(FeatureError::LengthMismatch {
                left: values.len(),
                right: rows * N_FEATURES,
            });
        }
        Ok(Self { meta, rows, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        N_FEATURES
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.values[r * N_FEATURES..(r + 1) * N_FEATURES]
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.values[r * N_FEATURES + c]
    }

    pub fn window_ms(&self) -> f64 {
        self.meta.window.width_ms
    }
}

/// Frame an (already preprocessed) signal and build its fixed-size feature matrix.
pub fn extract_feature_matrix(
    buf: &AudioBuffer,
    spec: &WindowSpec,
    cfg: &FeatureConfig,
    utterance_id: &str,
    source_path: &str,
) -> Result<FeatureMatrix, FeatureError> {
    let frame_iter = frames(buf, spec)?;
    let frame_count = frame_iter.len();
    let mut matrix = FeatureMatrix::zeros(
        cfg.max_frames,
        FeatureMeta {
            utterance_id: utterance_id.to_string(),
            source_path: source_path.to_string(),
            sample_rate: buf.sample_rate,
            window: *spec,
            frame_count,
            warnings: Vec::new(),
        },
    );
    if frame_count == 0 {
        log::warn!(
            "{utterance_id}: {} samples is shorter than one {} window; emitting zero features",
            buf.len(),
            spec.label()
        );
        matrix.meta.warnings.push(format!(
            "signal of {} samples yields no {} frames",
            buf.len(),
            spec.label()
        ));
        return Ok(matrix);
    }
    let mut extractor =
        FrameFeatures::new(cfg, spec.length_samples(buf.sample_rate), buf.sample_rate)?;
    let mut previous: Option<Spectrum> = None;
    for (r, frame) in frame_iter.take(cfg.max_frames).enumerate() {
        let spectrum = extractor.spectrum(&frame.values)?;
        let v = extractor.vector(&frame.values, &spectrum, previous.as_ref())?;
        for (slot, x) in matrix.values[r * N_FEATURES..(r + 1) * N_FEATURES]
            .iter_mut()
            .zip(v)
        {
            *slot = x as f32;
        }
        previous = Some(spectrum);
    }
    Ok(matrix)
}

/// Per-column mean and standard deviation, for optional z-scoring before the CNN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ColumnStats {
    /// Statistics over every row of every matrix, padding rows included.
    pub fn fit<'a>(matrices: impl IntoIterator<Item = &'a FeatureMatrix>) -> Self {
        let mut sum = vec![0.0f64; N_FEATURES];
        let mut sq = vec![0.0f64; N_FEATURES];
        let mut n = 0usize;
        for m in matrices {
            for r in 0..m.rows() {
                for (c, &v) in m.row(r).iter().enumerate() {
                    sum[c] += v as f64;
                    sq[c] += (v as f64).powi(2);
                }
                n += 1;
            }
        }
        let n = n.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = (q / n - m * m).max(0.0);
                if var.sqrt() > 1e-8 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, values: &[f32], out: &mut [f64]) {
        for (i, (o, &v)) in out.iter_mut().zip(values).enumerate() {
            let c = i % N_FEATURES;
            *o = (v as f64 - self.mean[c]) / self.std[c];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::WindowShape;
    use std::f64::consts::PI;

    fn tone(freq: f64, rate: u32, secs: f64) -> AudioBuffer {
        let n = (rate as f64 * secs) as usize;
        let s = (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / rate as f64).sin())
            .collect();
        AudioBuffer::new(s, rate).unwrap()
    }

    #[test]
    fn one_second_pads_to_200() {
        let buf = tone(300.0, 16000, 1.0);
        let spec = WindowSpec::half_overlap(25.0).unwrap();
        let m =
            extract_feature_matrix(&buf, &spec, &FeatureConfig::default(), "u", "u.wav").unwrap();
        assert_eq!(m.rows(), 200);
        assert_eq!(m.meta.frame_count, 79);
        assert!(m.row(78).iter().any(|&v| v != 0.0));
        for r in 79..200 {
            assert!(m.row(r).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn ten_seconds_truncates() {
        let buf = tone(300.0, 16000, 10.0);
        let spec = WindowSpec::half_overlap(25.0).unwrap();
        let m = extract_feature_matrix(&buf, &spec, &FeatureConfig::default(), "u", "").unwrap();
        assert_eq!(m.meta.frame_count, 799);
        assert_eq!(m.rows(), 200);
        assert!(m.row(199).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn too_short_is_all_zero_with_warning() {
        let buf = AudioBuffer::new(vec![0.5; 100], 16000).unwrap();
        let spec = WindowSpec::half_overlap(25.0).unwrap();
        let m = extract_feature_matrix(&buf, &spec, &FeatureConfig::default(), "u", "").unwrap();
        assert!(m.values().iter().all(|&v| v == 0.0));
        assert_eq!(m.meta.frame_count, 0);
        assert_eq!(m.meta.warnings.len(), 1);
    }

    #[test]
    fn first_row_flux_is_zero_and_columns_are_in_order() {
        let buf = tone(440.0, 16000, 0.5);
        let spec = WindowSpec::new(50.0, 0.5, WindowShape::Hamming).unwrap();
        let m = extract_feature_matrix(&buf, &spec, &FeatureConfig::default(), "u", "").unwrap();
        assert_eq!(m.get(0, COL_FLUX), 0.0);
        // A440 dominates the chroma block
        assert_eq!(m.get(3, COL_CHROMA), 1.0);
        let frames = crate::dsp::frame_signal(&buf, &spec).unwrap();
        let zcr = zero_crossing_rate(&frames[2].values).unwrap();
        assert_eq!(m.get(2, COL_ZCR), zcr as f32);
        let e = short_term_energy(&frames[2].values).unwrap();
        assert_eq!(m.get(2, COL_ENERGY), e as f32);
    }

    #[test]
    fn column_stats_standardize() {
        let meta = FeatureMeta {
            utterance_id: "a".into(),
            source_path: String::new(),
            sample_rate: 16000,
            window: WindowSpec::half_overlap(25.0).unwrap(),
            frame_count: 2,
            warnings: vec![],
        };
        let vals: Vec<f32> = (0..2 * N_FEATURES)
            .map(|i| (i / N_FEATURES) as f32 * 2.0)
            .collect();
        let m = FeatureMatrix::from_values(2, vals, meta).unwrap();
        let st = ColumnStats::fit([&m]);
        assert!(st.mean.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(st.std.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let mut out = vec![0.0; 2 * N_FEATURES];
        st.apply(m.values(), &mut out);
        assert_eq!(out[0], -1.0);
        assert_eq!(out[N_FEATURES], 1.0);
    }
}

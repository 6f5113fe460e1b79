//! Pitch-class energy profile.

use super::EPS;

/// Bins below this frequency (A0) do not contribute.
pub const MIN_CHROMA_HZ: f64 = 27.5;

/// Pitch class of a frequency with A = 0, A# = 1, ..., G# = 11.
pub fn pitch_class(freq_hz: f64) -> usize {
    ((12.0 * (freq_hz / 440.0).log2()).round() as i64).rem_euclid(12) as usize
}

/// Precomputed bin → pitch-class assignment for one (FFT length, sample rate) pair.
#[derive(Debug, Clone)]
pub struct ChromaMap {
    classes: Vec<Option<usize>>,
}

impl ChromaMap {
    pub fn new(n_bins: usize, fft_len: usize, sample_rate: u32) -> Self {
        let classes = (0..n_bins)
            .map(|k| {
                let f = k as f64 * sample_rate as f64 / fft_len as f64;
                (f >= MIN_CHROMA_HZ).then(|| pitch_class(f))
            })
            .collect();
        Self { classes }
    }

    /// 12 max-normalized class energies followed by their standard deviation.
    pub fn chroma(&self, spectrum: &[f64]) -> [f64; 13] {
        let mut energy = [0.0f64; 12];
        for (s, class) in spectrum.iter().zip(&self.classes) {
            if let Some(c) = class {
                energy[*c] += s * s;
            }
        }
        let peak = energy.iter().cloned().fold(0.0, f64::max).max(EPS);
        let mut out = [0.0; 13];
        for (o, e) in out.iter_mut().zip(energy) {
            *o = e / peak;
        }
        let mean = out[..12].iter().sum::<f64>() / 12.0;
        out[12] = (out[..12].iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 12.0).sqrt();
        out
    }
}

pub fn chroma(spectrum: &[f64], fft_len: usize, sample_rate: u32) -> [f64; 13] {
    ChromaMap::new(spectrum.len(), fft_len, sample_rate).chroma(spectrum)
}

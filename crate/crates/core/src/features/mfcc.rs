//! Mel-frequency cepstral coefficients.

use std::f64::consts::PI;

use super::{FeatureError, EPS};

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with centers evenly spaced on the mel scale from 0 Hz to Nyquist,
/// evaluated at the bin frequencies of a given FFT length and sample rate.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// `weights[j][k]`: gain of filter `j` at bin `k`.
    weights: Vec<Vec<f64>>,
    n_bins: usize,
    dct: Vec<Vec<f64>>,
}

impl MelFilterbank {
    pub fn new(
        n_filters: usize,
        n_coeffs: usize,
        n_bins: usize,
        fft_len: usize,
        sample_rate: u32,
    ) -> Result<Self, FeatureError> {
        if n_filters == 0 || n_coeffs == 0 || n_coeffs > n_filters {
            return Err(FeatureError::InvalidParameter(format!(
                "need 0 < n_coeffs ({n_coeffs}) <= n_filters ({n_filters})"
            )));
        }
        if n_bins < 2 * n_filters {
            return Err(FeatureError::SpectrumTooShort {
                needed: 2 * n_filters,
                got: n_bins,
            });
        }
        let nyquist = sample_rate as f64 / 2.0;
        let mel_max = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..n_filters + 2)
            .map(|i| mel_to_hz(mel_max * i as f64 / (n_filters + 1) as f64))
            .collect();
        let bin_hz = |k: usize| k as f64 * sample_rate as f64 / fft_len as f64;
        let weights = (0..n_filters)
            .map(|j| {
                let (lo, mid, hi) = (edges[j], edges[j + 1], edges[j + 2]);
                (0..n_bins)
                    .map(|k| {
                        let f = bin_hz(k);
                        if f >= lo && f <= mid {
                            (f - lo) / (mid - lo)
                        } else if f > mid && f <= hi {
                            (hi - f) / (hi - mid)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            weights,
            n_bins,
            dct: dct_ii_matrix(n_coeffs, n_filters),
        })
    }

    pub fn n_filters(&self) -> usize {
        self.weights.len()
    }

    /// Filter energies over the power spectrum.
    pub fn energies(&self, spectrum: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w.iter().zip(spectrum).map(|(g, s)| g * s * s).sum())
            .collect()
    }

    /// Coefficients `0..n_coeffs` of the orthonormal DCT-II of the log filter energies.
    pub fn mfcc(&self, spectrum: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if spectrum.len() != self.n_bins {
            return Err(FeatureError::LengthMismatch {
                left: spectrum.len(),
                right: self.n_bins,
            });
        }
        let logs: Vec<f64> = self
            .energies(spectrum)
            .iter()
            .map(|e| e.max(EPS).ln())
            .collect();
        Ok(self
            .dct
            .iter()
            .map(|row| row.iter().zip(&logs).map(|(c, l)| c * l).sum())
            .collect())
    }
}

fn dct_ii_matrix(n_out: usize, n_in: usize) -> Vec<Vec<f64>> {
    let m = n_in as f64;
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / m).sqrt()
            } else {
                (2.0 / m).sqrt()
            };
            (0..n_in)
                .map(|n| scale * (PI * k as f64 * (2 * n + 1) as f64 / (2.0 * m)).cos())
                .collect()
        })
        .collect()
}

/// One-shot MFCC with 26 filters. Prefer a reused [`MelFilterbank`] for many frames.
pub fn mfcc(
    spectrum: &[f64],
    fft_len: usize,
    sample_rate: u32,
    n_coeffs: usize,
) -> Result<Vec<f64>, FeatureError> {
    MelFilterbank::new(26, n_coeffs, spectrum.len(), fft_len, sample_rate)?.mfcc(spectrum)
}

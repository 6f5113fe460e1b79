//! Descriptors computed from a one-sided magnitude spectrum.

use super::{entropy_bits, FeatureError, EPS};

/// Magnitude-weighted mean and spread of normalized bin positions `(k+1)/B`.
pub fn spectral_centroid_spread(spectrum: &[f64]) -> Result<(f64, f64), FeatureError> {
    if spectrum.is_empty() {
        return Err(FeatureError::SpectrumTooShort { needed: 1, got: 0 });
    }
    let b = spectrum.len() as f64;
    let weight = spectrum.iter().sum::<f64>() + EPS;
    let centroid = spectrum
        .iter()
        .enumerate()
        .map(|(k, s)| (k + 1) as f64 / b * s)
        .sum::<f64>()
        / weight;
    let spread = (spectrum
        .iter()
        .enumerate()
        .map(|(k, s)| ((k + 1) as f64 / b - centroid).powi(2) * s)
        .sum::<f64>()
        / weight)
        .sqrt();
    Ok((centroid, spread))
}

/// Entropy (bits) of squared-magnitude energy split into `n_bands` equal-width bands.
pub fn spectral_entropy(spectrum: &[f64], n_bands: usize) -> Result<f64, FeatureError> {
    if n_bands == 0 || spectrum.len() < n_bands {
        return Err(FeatureError::SpectrumTooShort {
            needed: n_bands.max(1),
            got: spectrum.len(),
        });
    }
    let width = spectrum.len() / n_bands;
    let bands: Vec<f64> = spectrum
        .chunks_exact(width)
        .take(n_bands)
        .map(|c| c.iter().map(|s| s * s).sum())
        .collect();
    let total = bands.iter().sum::<f64>() + EPS;
    Ok(entropy_bits(bands.iter().map(|e| e / total)))
}

/// Squared distance between the sum-normalized current and previous spectra.
pub fn spectral_flux(current: &[f64], previous: &[f64]) -> Result<f64, FeatureError> {
    if current.len() != previous.len() {
        return Err(FeatureError::LengthMismatch {
            left: current.len(),
            right: previous.len(),
        });
    }
    let sc = current.iter().sum::<f64>() + EPS;
    let sp = previous.iter().sum::<f64>() + EPS;
    Ok(current
        .iter()
        .zip(previous)
        .map(|(c, p)| (c / sc - p / sp).powi(2))
        .sum())
}

/// Smallest bin `m` whose cumulative energy reaches `fraction` of the total, as `m / B`.
pub fn spectral_rolloff(spectrum: &[f64], fraction: f64) -> Result<f64, FeatureError> {
    if spectrum.is_empty() {
        return Err(FeatureError::SpectrumTooShort { needed: 1, got: 0 });
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(FeatureError::InvalidParameter(format!(
            "rolloff fraction must be in (0, 1), got {fraction}"
        )));
    }
    let total: f64 = spectrum.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let threshold = fraction * total;
    let mut cumulative = 0.0;
    for (m, s) in spectrum.iter().enumerate() {
        cumulative += s * s;
        if cumulative >= threshold {
            return Ok(m as f64 / spectrum.len() as f64);
        }
    }
    // only reachable through rounding when the threshold sits at the very top
    Ok((spectrum.len() - 1) as f64 / spectrum.len() as f64)
}

//! Time-domain frame descriptors.

use super::{entropy_bits, FeatureError, EPS};

/// Fraction of adjacent sample pairs whose sign differs; zero counts as non-negative.
pub fn zero_crossing_rate(frame: &[f64]) -> Result<f64, FeatureError> {
    if frame.len() < 2 {
        return Err(FeatureError::FrameTooShort {
            needed: 2,
            got: frame.len(),
        });
    }
    let crossings = frame
        .windows(2)
        .filter(|p| (p[0] >= 0.0) != (p[1] >= 0.0))
        .count();
    Ok(crossings as f64 / (frame.len() - 1) as f64)
}

/// Mean of squared samples.
pub fn short_term_energy(frame: &[f64]) -> Result<f64, FeatureError> {
    if frame.is_empty() {
        return Err(FeatureError::FrameTooShort { needed: 1, got: 0 });
    }
    Ok(frame.iter().map(|x| x * x).sum::<f64>() / frame.len() as f64)
}

/// Shannon entropy (bits) of the energy distribution over `n_subframes`
/// equal chunks. The remainder after the last full chunk is ignored.
pub fn energy_entropy(frame: &[f64], n_subframes: usize) -> Result<f64, FeatureError> {
    if n_subframes == 0 || frame.len() < n_subframes {
        return Err(FeatureError::FrameTooShort {
            needed: n_subframes.max(1),
            got: frame.len(),
        });
    }
    let chunk = frame.len() / n_subframes;
    let energies: Vec<f64> = frame
        .chunks_exact(chunk)
        .take(n_subframes)
        .map(|c| c.iter().map(|x| x * x).sum())
        .collect();
    let total: f64 = energies.iter().sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let denom = total.max(EPS);
    Ok(entropy_bits(energies.iter().map(|e| e / denom)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zcr_examples() {
        assert_eq!(zero_crossing_rate(&[0.3; 10]).unwrap(), 0.0);
        let alt: Vec<f64> = (0..9)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        assert_eq!(zero_crossing_rate(&alt).unwrap(), 1.0);
        assert!((zero_crossing_rate(&[1.0, -1.0, -1.0, 1.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        // zero is non-negative, so [0, 1] has no crossing
        assert_eq!(zero_crossing_rate(&[0.0, 1.0]).unwrap(), 0.0);
        assert!(zero_crossing_rate(&[1.0]).is_err());
    }

    #[test]
    fn energy_examples() {
        assert_eq!(short_term_energy(&[0.0; 5]).unwrap(), 0.0);
        assert_eq!(short_term_energy(&[1.0, -1.0, 1.0, -1.0]).unwrap(), 1.0);
        assert_eq!(short_term_energy(&[0.5, 0.5]).unwrap(), 0.25);
        assert!(short_term_energy(&[]).is_err());
    }

    #[test]
    fn energy_entropy_examples() {
        let mut one = vec![0.0; 100];
        one[3] = 1.0;
        assert_eq!(energy_entropy(&one, 10).unwrap(), 0.0);
        let uniform = vec![0.5; 100];
        assert!((energy_entropy(&uniform, 10).unwrap() - 10f64.log2()).abs() < 1e-12);
        assert_eq!(energy_entropy(&[0.0; 100], 10).unwrap(), 0.0);
        assert!(energy_entropy(&[0.0; 9], 10).is_err());
    }

    #[test]
    fn energy_entropy_truncates_remainder() {
        // 105 samples: chunks of 10, the last 5 samples are ignored
        let mut x = vec![1.0; 100];
        x.extend([100.0; 5]);
        assert!((energy_entropy(&x, 10).unwrap() - 10f64.log2()).abs() < 1e-12);
    }
}

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::DspError;
use crate::audio_io::AudioBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WindowShape {
    #[default]
    Hamming,
    Rectangular,
}

impl fmt::Display for WindowShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WindowShape::Hamming => f.write_str("hamming"),
            WindowShape::Rectangular => f.write_str("rectangular"),
        }
    }
}

impl std::str::FromStr for WindowShape {
    type Err = DspError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hamming" => Ok(WindowShape::Hamming),
            "rectangular" | "rect" => Ok(WindowShape::Rectangular),
            other => Err(DspError::InvalidWindow(format!(
                "unknown window shape {other:?}"
            ))),
        }
    }
}

/// Width, overlap and shape of a short-time analysis window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub width_ms: f64,
    /// Fraction of the window shared by consecutive frames, in `[0, 1)`.
    pub overlap: f64,
    pub shape: WindowShape,
}

impl WindowSpec {
    pub fn new(width_ms: f64, overlap: f64, shape: WindowShape) -> Result<Self, DspError> {
        let spec = Self {
            width_ms,
            overlap,
            shape,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Hamming window at 50% overlap.
    pub fn half_overlap(width_ms: f64) -> Result<Self, DspError> {
        Self::new(width_ms, 0.5, WindowShape::Hamming)
    }

    pub fn validate(&self) -> Result<(), DspError> {
        if !(self.width_ms.is_finite() && self.width_ms > 0.0) {
            return Err(DspError::InvalidWindow(format!(
                "width must be positive, got {} ms",
                self.width_ms
            )));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(DspError::InvalidWindow(format!(
                "overlap must be in [0, 1), got {}",
                self.overlap
            )));
        }
        Ok(())
    }

    pub fn hop_ms(&self) -> f64 {
        self.width_ms * (1.0 - self.overlap)
    }

    pub fn length_samples(&self, sample_rate: u32) -> usize {
        ms_to_samples(self.width_ms, sample_rate)
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        ms_to_samples(self.hop_ms(), sample_rate)
    }

    /// Short label such as `25ms`, used in file names and tables.
    pub fn label(&self) -> String {
        format!("{}ms", self.width_ms)
    }
}

/// Milliseconds to samples, rounding half up.
pub fn ms_to_samples(ms: f64, sample_rate: u32) -> usize {
    (ms * sample_rate as f64 / 1000.0 + 0.5).floor() as usize
}

pub fn window_coefficients(shape: WindowShape, length: usize) -> Result<Vec<f64>, DspError> {
    if length == 0 {
        return Err(DspError::EmptyWindow);
    }
    Ok(match shape {
        WindowShape::Rectangular => vec![1.0; length],
        WindowShape::Hamming if length == 1 => vec![1.0],
        WindowShape::Hamming => {
            let denom = (length - 1) as f64;
            (0..length)
                .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / denom).cos())
                .collect()
        }
    })
}

/// A windowed slice of a signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub values: Vec<f64>,
    pub index: usize,
    pub start_sample: usize,
}

/// Number of complete frames; trailing partial frames are dropped.
pub fn frame_count(signal_len: usize, window: usize, hop: usize) -> usize {
    if window == 0 || hop == 0 || signal_len < window {
        0
    } else {
        (signal_len - window) / hop + 1
    }
}

/// Lazily yields windowed frames. Frame `k` covers samples `[k*hop, k*hop + w)`.
pub fn frames<'a>(
    buf: &'a AudioBuffer,
    spec: &WindowSpec,
) -> Result<impl ExactSizeIterator<Item = Frame> + 'a, DspError> {
    spec.validate()?;
    let w = spec.length_samples(buf.sample_rate);
    let h = spec.hop_samples(buf.sample_rate);
    if w == 0 {
        return Err(DspError::EmptyWindow);
    }
    if h == 0 {
        return Err(DspError::InvalidWindow(format!(
            "hop of {} ms rounds to zero samples at {} Hz",
            spec.hop_ms(),
            buf.sample_rate
        )));
    }
    let coeffs = window_coefficients(spec.shape, w)?;
    let n = frame_count(buf.samples.len(), w, h);
    Ok((0..n).map(move |index| {
        let start = index * h;
        let values = buf.samples[start..start + w]
            .iter()
            .zip(&coeffs)
            .map(|(s, c)| s * c)
            .collect();
        Frame {
            values,
            index,
            start_sample: start,
        }
    }))
}

pub fn frame_signal(buf: &AudioBuffer, spec: &WindowSpec) -> Result<Vec<Frame>, DspError> {
    Ok(frames(buf, spec)?.collect())
}

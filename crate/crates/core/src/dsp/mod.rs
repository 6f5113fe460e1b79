//! Short-time analysis: window functions, framing and magnitude spectra.

mod fft;
mod window;

pub use fft::{fft_in_place, magnitude_spectrum, Complex, Spectrum, SpectrumAnalyzer};
pub use window::{
    frame_count, frame_signal, frames, ms_to_samples, window_coefficients, Frame, WindowShape,
    WindowSpec,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("window length must be at least one sample")]
    EmptyWindow,
    #[error("invalid window spec: {0}")]
    InvalidWindow(String),
    #[error("cannot take the spectrum of an empty frame")]
    EmptyFrame,
    #[error("FFT length {0} is not a power of two")]
    NotPowerOfTwo(usize),
}

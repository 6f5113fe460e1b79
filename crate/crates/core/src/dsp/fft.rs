use std::f64::consts::PI;

use super::{DspError, Frame};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn norm(self) -> f64 {
        self.re.hypot(self.im)
    }

    fn mul(self, o: Complex) -> Complex {
        Complex::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
}

/// Iterative radix-2 decimation-in-time FFT with precomputed twiddles.
#[derive(Debug, Clone)]
pub struct SpectrumAnalyzer {
    n: usize,
    twiddles: Vec<Complex>,
    bitrev: Vec<usize>,
    buffer: Vec<Complex>,
}

impl SpectrumAnalyzer {
    pub fn new(fft_len: usize) -> Result<Self, DspError> {
        if fft_len == 0 || !fft_len.is_power_of_two() {
            return Err(DspError::NotPowerOfTwo(fft_len));
        }
        let twiddles = (0..fft_len / 2)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / fft_len as f64;
                Complex::new(a.cos(), a.sin())
            })
            .collect();
        let bits = fft_len.trailing_zeros();
        let bitrev = (0..fft_len)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (usize::BITS - bits)
                }
            })
            .collect();
        Ok(Self {
            n: fft_len,
            twiddles,
            bitrev,
            buffer: vec![Complex::default(); fft_len],
        })
    }

    /// Analyzer sized for frames of `frame_len` samples.
    pub fn for_frame_len(frame_len: usize) -> Result<Self, DspError> {
        if frame_len == 0 {
            return Err(DspError::EmptyFrame);
        }
        Self::new(frame_len.next_power_of_two())
    }

    pub fn fft_len(&self) -> usize {
        self.n
    }

    pub fn transform(&mut self, data: &mut [Complex]) {
        assert_eq!(data.len(), self.n, "FFT input length mismatch");
        for i in 0..self.n {
            let j = self.bitrev[i];
            if i < j {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= self.n {
            let half = len / 2;
            let stride = self.n / len;
            for start in (0..self.n).step_by(len) {
                for k in 0..half {
                    let t = data[start + k + half].mul(self.twiddles[k * stride]);
                    let u = data[start + k];
                    data[start + k] = Complex::new(u.re + t.re, u.im + t.im);
                    data[start + k + half] = Complex::new(u.re - t.re, u.im - t.im);
                }
            }
            len <<= 1;
        }
    }

    /// One-sided magnitude spectrum of a real frame, zero-padded to the FFT length.
    pub fn magnitude(&mut self, values: &[f64]) -> Result<Spectrum, DspError> {
        if values.is_empty() {
            return Err(DspError::EmptyFrame);
        }
        if values.len() > self.n {
            return Err(DspError::InvalidWindow(format!(
                "frame of {} samples exceeds FFT length {}",
                values.len(),
                self.n
            )));
        }
        let mut buf = std::mem::take(&mut self.buffer);
        for (slot, v) in buf
            .iter_mut()
            .zip(values.iter().chain(std::iter::repeat(&0.0)))
        {
            *slot = Complex::new(*v, 0.0);
        }
        self.transform(&mut buf);
        let scale = 1.0 / values.len() as f64;
        let magnitudes = buf[..=self.n / 2]
            .iter()
            .map(|c| c.norm() * scale)
            .collect();
        self.buffer = buf;
        Ok(Spectrum {
            magnitudes,
            fft_len: self.n,
            frame_len: values.len(),
        })
    }
}

/// In-place forward FFT; the length must be a power of two.
pub fn fft_in_place(data: &mut [Complex]) -> Result<(), DspError> {
    let mut plan = SpectrumAnalyzer::new(data.len())?;
    plan.transform(data);
    Ok(())
}

/// `|DFT|/N` at bins `0..=fft_len/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub magnitudes: Vec<f64>,
    /// Padded transform length; bin `k` sits at `k * sample_rate / fft_len` Hz.
    pub fft_len: usize,
    /// Unpadded frame length the magnitudes were divided by.
    pub frame_len: usize,
}

impl Spectrum {
    pub fn num_bins(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn bin_frequency(&self, bin: usize, sample_rate: u32) -> f64 {
        bin as f64 * sample_rate as f64 / self.fft_len as f64
    }

    /// Mean-square of the time signal rebuilt from the one-sided spectrum (Parseval).
    pub fn reconstructed_energy(&self) -> f64 {
        let last = self.magnitudes.len() - 1;
        let sum: f64 = self
            .magnitudes
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let w = if k == 0 || k == last { 1.0 } else { 2.0 };
                w * m * m
            })
            .sum();
        sum * self.frame_len as f64 / self.fft_len as f64
    }
}

pub fn magnitude_spectrum(frame: &Frame) -> Result<Spectrum, DspError> {
    SpectrumAnalyzer::for_frame_len(frame.values.len())?.magnitude(&frame.values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(values: Vec<f64>) -> Frame {
        Frame {
            values,
            index: 0,
            start_sample: 0,
        }
    }

    #[test]
    fn zero_frame_zero_spectrum() {
        let s = magnitude_spectrum(&frame(vec![0.0; 300])).unwrap();
        assert_eq!(s.fft_len, 512);
        assert_eq!(s.num_bins(), 257);
        assert!(s.magnitudes.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn cosine_on_bin_peaks_at_half_amplitude() {
        let n = 256;
        let k = 19;
        let amp = 0.8;
        let x: Vec<f64> = (0..n)
            .map(|i| amp * (2.0 * PI * k as f64 * i as f64 / n as f64).cos())
            .collect();
        let s = magnitude_spectrum(&frame(x)).unwrap();
        for (bin, m) in s.magnitudes.iter().enumerate() {
            if bin == k {
                assert!((m - amp / 2.0).abs() < 1e-12);
            } else {
                assert!(m.abs() < 1e-12, "bin {bin} = {m}");
            }
        }
    }

    #[test]
    fn empty_frame_rejected() {
        assert_eq!(
            magnitude_spectrum(&frame(vec![])),
            Err(DspError::EmptyFrame)
        );
        assert!(SpectrumAnalyzer::new(12).is_err());
    }

    #[test]
    fn single_sample_transform() {
        let s = magnitude_spectrum(&frame(vec![-0.25])).unwrap();
        assert_eq!(s.magnitudes, vec![0.25]);
        assert!((s.reconstructed_energy() - 0.0625).abs() < 1e-15);
    }
}

//! Frame a tone with each analysis window and inspect one spectrum.

use std::f64::consts::PI;

use mwa_ser::audio_io::AudioBuffer;
use mwa_ser::dsp::{
    frame_signal, magnitude_spectrum, window_coefficients, WindowShape, WindowSpec,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rate = 16_000;
    let samples = (0..rate)
        .map(|i| (2.0 * PI * 1000.0 * i as f64 / rate as f64).sin())
        .collect();
    let buf = AudioBuffer::new(samples, rate as u32)?;

    for ms in [25.0, 50.0, 100.0, 200.0] {
        let spec = WindowSpec::half_overlap(ms)?;
        let frames = frame_signal(&buf, &spec)?;
        println!(
            "{:>6}: {} samples/frame, hop {}, {} frames",
            spec.label(),
            spec.length_samples(buf.sample_rate),
            spec.hop_samples(buf.sample_rate),
            frames.len()
        );
    }

    let ham = window_coefficients(WindowShape::Hamming, 5)?;
    println!("hamming(5) = {ham:.3?}");

    let spec = WindowSpec::new(25.0, 0.5, WindowShape::Hamming)?;
    let frame = &frame_signal(&buf, &spec)?[3];
    let spectrum = magnitude_spectrum(frame)?;
    let (peak, _) = spectrum
        .magnitudes
        .iter()
        .enumerate()
        .fold(
            (0, 0.0),
            |best, (i, &m)| if m > best.1 { (i, m) } else { best },
        );
    println!(
        "frame {} peaks at bin {} = {:.1} Hz",
        frame.index,
        peak,
        spectrum.bin_frequency(peak, buf.sample_rate)
    );
    Ok(())
}

//! WAV loading and signal-level preprocessing.
//!
//! Files are decoded at their native sample rate into a mono `f64` buffer.
//! Integer PCM is scaled by the full-scale value of its type, so 16-bit
//! `-32768` maps to exactly `-1.0`. Multi-channel audio is averaged down to
//! mono. Preprocessing is DC removal followed by peak normalization.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("audio file not found: {0}")]
    NotFound(PathBuf),
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed RIFF/WAVE data: {0}")]
    Malformed(String),
    #[error("unsupported WAV encoding: format tag {format_tag:#06x}, {bits_per_sample} bits")]
    UnsupportedCodec {
        format_tag: u16,
        bits_per_sample: u16,
    },
    #[error("audio buffer is empty")]
    Empty,
    #[error("sample rate must be positive")]
    InvalidSampleRate,
}

/// A mono signal at its native sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidSampleRate);
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// DC removal followed by peak normalization.
    pub fn preprocess(self) -> Result<Self, AudioError> {
        Ok(peak_normalize(remove_dc(self)?))
    }
}

/// Sample encodings accepted by [`read_wav`] and produced by [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    /// Unsigned 8-bit PCM.
    Pcm8,
    Pcm16,
    Pcm24,
    Pcm32,
    Float32,
}

impl SampleFormat {
    fn bits(self) -> u16 {
        match self {
            SampleFormat::Pcm8 => 8,
            SampleFormat::Pcm16 => 16,
            SampleFormat::Pcm24 => 24,
            SampleFormat::Pcm32 | SampleFormat::Float32 => 32,
        }
    }

    fn format_tag(self) -> u16 {
        match self {
            SampleFormat::Float32 => FORMAT_IEEE_FLOAT,
            _ => FORMAT_PCM,
        }
    }

    fn from_header(format_tag: u16, bits: u16) -> Result<Self, AudioError> {
        match (format_tag, bits) {
            (FORMAT_PCM, 8) => Ok(SampleFormat::Pcm8),
            (FORMAT_PCM, 16) => Ok(SampleFormat::Pcm16),
            (FORMAT_PCM, 24) => Ok(SampleFormat::Pcm24),
            (FORMAT_PCM, 32) => Ok(SampleFormat::Pcm32),
            (FORMAT_IEEE_FLOAT, 32) => Ok(SampleFormat::Float32),
            _ => Err(AudioError::UnsupportedCodec {
                format_tag,
                bits_per_sample: bits,
            }),
        }
    }

    fn decode(self, bytes: &[u8]) -> f64 {
        match self {
            SampleFormat::Pcm8 => (bytes[0] as f64 - 128.0) / 128.0,
            SampleFormat::Pcm16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64 / 32768.0,
            SampleFormat::Pcm24 => {
                // sign-extend through the top byte of an i32
                let v = i32::from_le_bytes([0, bytes[0], bytes[1], bytes[2]]) >> 8;
                v as f64 / 8_388_608.0
            }
            SampleFormat::Pcm32 => {
                i32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as f64
                    / 2_147_483_648.0
            }
            SampleFormat::Float32 => {
                f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as f64
            }
        }
    }

    fn encode(self, value: f64, out: &mut Vec<u8>) {
        let clamped = value.clamp(-1.0, 1.0);
        match self {
            SampleFormat::Pcm8 => {
                out.push((clamped * 128.0 + 128.0).round().clamp(0.0, 255.0) as u8);
            }
            SampleFormat::Pcm16 => {
                let v = (clamped * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                out.extend_from_slice(&v.to_le_bytes());
            }
            SampleFormat::Pcm24 => {
                let v = (clamped * 8_388_608.0)
                    .round()
                    .clamp(-8_388_608.0, 8_388_607.0) as i32;
                out.extend_from_slice(&v.to_le_bytes()[..3]);
            }
            SampleFormat::Pcm32 => {
                let v = (clamped * 2_147_483_648.0)
                    .round()
                    .clamp(-2_147_483_648.0, 2_147_483_647.0) as i32;
                out.extend_from_slice(&v.to_le_bytes());
            }
            SampleFormat::Float32 => out.extend_from_slice(&(value as f32).to_le_bytes()),
        }
    }
}

struct FmtChunk {
    channels: u16,
    sample_rate: u32,
    block_align: u16,
    format: SampleFormat,
}

fn read_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk, AudioError> {
    if body.len() < 16 {
        return Err(AudioError::Malformed(format!(
            "fmt chunk is {} bytes, expected at least 16",
            body.len()
        )));
    }
    let mut format_tag = read_u16(body, 0);
    let channels = read_u16(body, 2);
    let sample_rate = read_u32(body, 4);
    let block_align = read_u16(body, 12);
    let bits = read_u16(body, 14);
    if format_tag == FORMAT_EXTENSIBLE {
        // cbSize(2) validBits(2) channelMask(4) then a GUID whose first two bytes are the subformat tag
        if body.len() < 40 {
            return Err(AudioError::Malformed(
                "WAVE_FORMAT_EXTENSIBLE fmt chunk truncated".into(),
            ));
        }
        format_tag = read_u16(body, 24);
    }
    if channels == 0 {
        return Err(AudioError::Malformed("zero channels".into()));
    }
    if sample_rate == 0 {
        return Err(AudioError::Malformed("zero sample rate".into()));
    }
    let format = SampleFormat::from_header(format_tag, bits)?;
    let min_align = channels as usize * (bits as usize / 8);
    if (block_align as usize) < min_align {
        return Err(AudioError::Malformed(format!(
            "block align {block_align} too small for {channels} channels of {bits} bits"
        )));
    }
    Ok(FmtChunk {
        channels,
        sample_rate,
        block_align,
        format,
    })
}

/// Decode an in-memory RIFF/WAVE image.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioBuffer, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::Malformed("missing RIFF/WAVE signature".into()));
    }
    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4) as usize;
        let start = pos + 8;
        // Some writers leave the data size at 0 or 0xFFFFFFFF when streaming; clamp to what exists.
        let end = start.saturating_add(size).min(bytes.len());
        let body = &bytes[start..end];
        match id {
            b"fmt " => fmt = Some(parse_fmt(body)?),
            b"data" => data = Some(body),
            _ => {}
        }
        pos = start.saturating_add(size).saturating_add(size & 1);
    }
    let fmt = fmt.ok_or_else(|| AudioError::Malformed("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| AudioError::Malformed("no data chunk".into()))?;

    let sample_bytes = fmt.format.bits() as usize / 8;
    let channels = fmt.channels as usize;
    let align = fmt.block_align as usize;
    let n_frames = data.len() / align;
    let mut samples = Vec::with_capacity(n_frames);
    for frame in data.chunks_exact(align) {
        let sum: f64 = (0..channels)
            .map(|c| {
                fmt.format
                    .decode(&frame[c * sample_bytes..(c + 1) * sample_bytes])
            })
            .sum();
        samples.push(sum / channels as f64);
    }
    AudioBuffer::new(samples, fmt.sample_rate)
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            AudioError::NotFound(path.to_path_buf())
        } else {
            AudioError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })?;
    decode_wav(&bytes)
}

/// Encode interleaved samples (`channels` values per frame) as a canonical WAV image.
pub fn encode_wav(
    interleaved: &[f64],
    channels: u16,
    sample_rate: u32,
    format: SampleFormat,
) -> Vec<u8> {
    let bits = format.bits();
    let block_align = channels * bits / 8;
    let mut data = Vec::with_capacity(interleaved.len() * bits as usize / 8);
    for &s in interleaved {
        format.encode(s, &mut data);
    }
    let mut out = Vec::with_capacity(44 + data.len());
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format.format_tag().to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data.len() as u32).to_le_bytes());
    out.extend_from_slice(&data);
    out
}

/// Write a mono buffer to disk.
pub fn write_wav(
    path: impl AsRef<Path>,
    buf: &AudioBuffer,
    format: SampleFormat,
) -> Result<(), AudioError> {
    let path = path.as_ref();
    let bytes = encode_wav(&buf.samples, 1, buf.sample_rate, format);
    let io_err = |source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(&bytes).map_err(io_err)
}

/// Subtract the sample mean.
pub fn remove_dc(buf: AudioBuffer) -> Result<AudioBuffer, AudioError> {
    if buf.samples.is_empty() {
        return Err(AudioError::Empty);
    }
    let mean = buf.samples.iter().sum::<f64>() / buf.samples.len() as f64;
    let samples = buf.samples.iter().map(|s| s - mean).collect();
    Ok(AudioBuffer {
        samples,
        sample_rate: buf.sample_rate,
    })
}

/// Divide by the peak absolute value. All-zero input passes through.
pub fn peak_normalize(buf: AudioBuffer) -> AudioBuffer {
    let peak = buf.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak == 0.0 {
        return buf;
    }
    AudioBuffer {
        samples: buf.samples.iter().map(|s| s / peak).collect(),
        sample_rate: buf.sample_rate,
    }
}

/// Read a file and apply the standard preprocessing chain.
pub fn load_preprocessed(path: impl AsRef<Path>) -> Result<AudioBuffer, AudioError> {
    read_wav(path)?.preprocess()
}

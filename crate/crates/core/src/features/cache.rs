//! On-disk feature cache, one binary file plus JSON sidecar per (utterance, window).
//!
//! Binary layout, little-endian:
//!
//! ```text
//! "MWAF"            4 bytes
//! version           u32 (= 1)
//! window_ms         f32
//! overlap           f32
//! n_frames          u32
//! n_features        u32 (= 34)
//! values            n_frames * n_features f32, row-major
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{
    extract_feature_matrix, FeatureConfig, FeatureError, FeatureMatrix, FeatureMeta, N_FEATURES,
};
use crate::audio_io::load_preprocessed;
use crate::dsp::{WindowShape, WindowSpec};

pub const CACHE_MAGIC: &[u8; 4] = b"MWAF";
pub const CACHE_VERSION: u32 = 1;
const HEADER_LEN: usize = 24;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FeatureError + '_ {
    move |source| FeatureError::CacheIo {
        path: path.to_path_buf(),
        source,
    }
}

pub fn encode_matrix(m: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + m.values().len() * 4);
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.meta.window.width_ms as f32).to_le_bytes());
    out.extend_from_slice(&(m.meta.window.overlap as f32).to_le_bytes());
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(N_FEATURES as u32).to_le_bytes());
    for v in m.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Header fields of a cache file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheHeader {
    pub window_ms: f32,
    pub overlap: f32,
    pub n_frames: usize,
    pub n_features: usize,
}

pub fn decode_matrix(bytes: &[u8]) -> Result<(CacheHeader, Vec<f32>), FeatureError> {
    if bytes.len() < HEADER_LEN {
        return Err(FeatureError::Cache("truncated header".into()));
    }
    if &bytes[0..4] != CACHE_MAGIC {
        return Err(FeatureError::Cache("bad magic".into()));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let f32_at = |i: usize| f32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != CACHE_VERSION {
        return Err(FeatureError::Cache(format!(
            "unsupported version {version}"
        )));
    }
    let header = CacheHeader {
        window_ms: f32_at(8),
        overlap: f32_at(12),
        n_frames: u32_at(16) as usize,
        n_features: u32_at(20) as usize,
    };
    if header.n_features != N_FEATURES {
        return Err(FeatureError::Cache(format!(
            "expected {N_FEATURES} features, file has {}",
            header.n_features
        )));
    }
    let expected = HEADER_LEN + header.n_frames * header.n_features * 4;
    if bytes.len() != expected {
        return Err(FeatureError::Cache(format!(
            "payload is {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, values))
}

/// 64-bit FNV-1a; stable across platforms and toolchains.
fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .take(80)
        .collect()
}

/// File-backed cache with hit/miss counters.
#[derive(Debug)]
pub struct FeatureCache {
    dir: PathBuf,
    cfg: FeatureConfig,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl FeatureCache {
    pub fn new(dir: impl Into<PathBuf>, cfg: FeatureConfig) -> Result<Self, FeatureError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(Self {
            dir,
            cfg,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    /// Number of matrices computed from audio.
    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::SeqCst)
    }

    pub fn entry_path(&self, utterance_id: &str, spec: &WindowSpec) -> PathBuf {
        let shape = match spec.shape {
            WindowShape::Hamming => "ham",
            WindowShape::Rectangular => "rect",
        };
        self.dir.join(format!(
            "{}-{:016x}_{}ms_ov{}_{}_f{}.mwaf",
            sanitize(utterance_id),
            fnv1a(utterance_id),
            spec.width_ms,
            spec.overlap,
            shape,
            self.cfg.max_frames
        ))
    }

    fn sidecar_path(entry: &Path) -> PathBuf {
        entry.with_extension("json")
    }

    /// Read a cached matrix if present and consistent with `spec`.
    pub fn load(&self, utterance_id: &str, spec: &WindowSpec) -> Option<FeatureMatrix> {
        let path = self.entry_path(utterance_id, spec);
        let bytes = fs::read(&path).ok()?;
        let (header, values) = decode_matrix(&bytes).ok()?;
        let meta: FeatureMeta =
            serde_json::from_slice(&fs::read(Self::sidecar_path(&path)).ok()?).ok()?;
        let consistent = header.n_frames == self.cfg.max_frames
            && header.window_ms == spec.width_ms as f32
            && header.overlap == spec.overlap as f32
            && meta.utterance_id == utterance_id
            && meta.window == *spec;
        if !consistent {
            return None;
        }
        FeatureMatrix::from_values(header.n_frames, values, meta).ok()
    }

    pub fn store(&self, m: &FeatureMatrix) -> Result<PathBuf, FeatureError> {
        let path = self.entry_path(&m.meta.utterance_id, &m.meta.window);
        let sidecar = Self::sidecar_path(&path);
        let meta =
            serde_json::to_vec_pretty(&m.meta).map_err(|e| FeatureError::Cache(e.to_string()))?;
        write_atomic(&sidecar, &meta)?;
        write_atomic(&path, &encode_matrix(m))?;
        Ok(path)
    }

    /// Cached matrix, or extract from `audio_path` and store it.
    pub fn get_or_compute(
        &self,
        utterance_id: &str,
        audio_path: &Path,
        spec: &WindowSpec,
    ) -> Result<FeatureMatrix, FeatureError> {
        if let Some(m) = self.load(utterance_id, spec) {
            self.hits.fetch_add(1, Ordering::SeqCst);
            return Ok(m);
        }
        let buf = load_preprocessed(audio_path)?;
        let m = extract_feature_matrix(
            &buf,
            spec,
            &self.cfg,
            utterance_id,
            &audio_path.to_string_lossy(),
        )?;
        self.store(&m)?;
        self.misses.fetch_add(1, Ordering::SeqCst);
        Ok(m)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), FeatureError> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    drop(f);
    fs::rename(&tmp, path).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio_io::{write_wav, AudioBuffer, SampleFormat};

    fn meta(rows: usize) -> FeatureMeta {
        FeatureMeta {
            utterance_id: "spk1/utt 01".into(),
            source_path: "x.wav".into(),
            sample_rate: 16000,
            window: WindowSpec::half_overlap(25.0).unwrap(),
            frame_count: rows,
            warnings: vec![],
        }
    }

    #[test]
    fn binary_layout() {
        let vals: Vec<f32> = (0..2 * N_FEATURES).map(|i| i as f32 * 0.5).collect();
        let m = FeatureMatrix::from_values(2, vals.clone(), meta(2)).unwrap();
        let bytes = encode_matrix(&m);
        assert_eq!(&bytes[0..4], b"MWAF");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(f32::from_le_bytes(bytes[8..12].try_into().unwrap()), 25.0);
        assert_eq!(f32::from_le_bytes(bytes[12..16].try_into().unwrap()), 0.5);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 34);
        assert_eq!(bytes.len(), 24 + 2 * 34 * 4);
        let (h, back) = decode_matrix(&bytes).unwrap();
        assert_eq!(h.n_frames, 2);
        assert_eq!(back, vals);
    }

    #[test]
    fn decode_rejects_corruption() {
        let m = FeatureMatrix::zeros(3, meta(3));
        let mut bytes = encode_matrix(&m);
        bytes.pop();
        assert!(decode_matrix(&bytes).is_err());
        let mut bad = encode_matrix(&m);
        bad[0] = b'X';
        assert!(decode_matrix(&bad).is_err());
    }

    #[test]
    fn compute_then_hit() {
        let dir = tempfile::tempdir().unwrap();
        let wav = dir.path().join("a.wav");
        let samples = (0..8000).map(|i| (i as f64 * 0.1).sin() * 0.5).collect();
        write_wav(
            &wav,
            &AudioBuffer::new(samples, 16000).unwrap(),
            SampleFormat::Pcm16,
        )
        .unwrap();
        let cache = FeatureCache::new(dir.path().join("cache"), FeatureConfig::default()).unwrap();
        let spec = WindowSpec::half_overlap(25.0).unwrap();
        let a = cache.get_or_compute("a", &wav, &spec).unwrap();
        let b = cache.get_or_compute("a", &wav, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!((cache.misses(), cache.hits()), (1, 1));
        let other = WindowSpec::half_overlap(50.0).unwrap();
        cache.get_or_compute("a", &wav, &other).unwrap();
        assert_eq!(cache.misses(), 2);
    }

    #[test]
    fn distinct_ids_never_collide() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FeatureCache::new(dir.path(), FeatureConfig::default()).unwrap();
        let spec = WindowSpec::half_overlap(25.0).unwrap();
        assert_ne!(
            cache.entry_path("a/b", &spec),
            cache.entry_path("a_b", &spec)
        );
    }
}

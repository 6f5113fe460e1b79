//! Model checkpoints.
//!
//! Binary layout, little-endian:
//!
//! ```text
//! "MWAM"              4 bytes
//! version             u32 (= 1)
//! input h, w, c       3 × u32
//! n_layers            u32
//! per layer           u8 tag + u32 fields:
//!                       1 conv (size, cin, cout)   2 batchnorm (channels)
//!                       3 relu   4 maxpool   5 flatten
//!                       6 dense (inputs, outputs)  7 dropout (p as f32)
//! classes             u32
//! seed                u64
//! n_values            u64
//! values              f32 × n_values: per layer, parameters then
//!                     batchnorm running mean and variance
//! ```
//!
//! A JSON sidecar (same stem, `.json`) carries training metadata.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use super::layers::{BatchNorm, Conv2d, Dense, Dropout, Flatten, Layer, LayerSpec, MaxPool2, Relu};
use super::model::ConvBlock;
use super::{Architecture, CnnModel, NnError};

pub const MODEL_MAGIC: &[u8; 4] = b"MWAM";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Model(#[from] NnError),
    #[error("sidecar: {0}")]
    Sidecar(#[from] serde_json::Error),
}

fn corrupt(msg: impl Into<String>) -> CheckpointError {
    CheckpointError::Corrupt(msg.into())
}

pub fn encode_model(model: &CnnModel) -> Vec<u8> {
    let arch = model.architecture();
    let mut out = Vec::new();
    let put_u32 = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    out.extend_from_slice(MODEL_MAGIC);
    put_u32(&mut out, MODEL_VERSION as usize);
    put_u32(&mut out, arch.input_height);
    put_u32(&mut out, arch.input_width);
    put_u32(&mut out, arch.input_channels);
    put_u32(&mut out, model.layers().len());
    for layer in model.layers() {
        match layer.spec() {
            LayerSpec::Conv { size, cin, cout } => {
                out.push(1);
                put_u32(&mut out, size);
                put_u32(&mut out, cin);
                put_u32(&mut out, cout);
            }
            LayerSpec::BatchNorm { channels } => {
                out.push(2);
                put_u32(&mut out, channels);
            }
            LayerSpec::Relu => out.push(3),
            LayerSpec::MaxPool => out.push(4),
            LayerSpec::Flatten => out.push(5),
            LayerSpec::Dense { inputs, outputs } => {
                out.push(6);
                put_u32(&mut out, inputs);
                put_u32(&mut out, outputs);
            }
            LayerSpec::Dropout { p } => {
                out.push(7);
                out.extend_from_slice(&(p as f32).to_le_bytes());
            }
        }
    }
    put_u32(&mut out, arch.classes);
    out.extend_from_slice(&model.seed().to_le_bytes());
    let values: Vec<f64> = model
        .layers()
        .iter()
        .flat_map(|l| l.state().into_iter().flatten().copied().collect::<Vec<_>>())
        .collect();
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| corrupt("unexpected end of file"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f32(&mut self) -> Result<f32, CheckpointError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Recovers the architecture from a layer list shaped like the ones
/// [`CnnModel::new`] builds.
fn architecture_from(
    specs: &[LayerSpec],
    input: (usize, usize, usize),
    classes: usize,
) -> Result<Architecture, CheckpointError> {
    let mut blocks = Vec::new();
    let mut hidden = Vec::new();
    let mut dropout = None;
    let mut i = 0;
    while let Some(LayerSpec::Conv { size, cout, .. }) = specs.get(i) {
        let block = &specs[i..(i + 4).min(specs.len())];
        if !matches!(
            block,
            [
                _,
                LayerSpec::BatchNorm { .. },
                LayerSpec::Relu,
                LayerSpec::MaxPool
            ]
        ) {
            return Err(corrupt(format!("malformed conv block at layer {i}")));
        }
        blocks.push(ConvBlock {
            kernels: *cout,
            size: *size,
        });
        i += 4;
    }
    if specs.get(i) != Some(&LayerSpec::Flatten) {
        return Err(corrupt(format!("expected flatten at layer {i}")));
    }
    i += 1;
    while let [LayerSpec::Dense { outputs, .. }, LayerSpec::Relu, LayerSpec::Dropout { p }, ..] =
        &specs[i..]
    {
        hidden.push(*outputs);
        dropout = Some(*p);
        i += 3;
    }
    match &specs[i..] {
        [LayerSpec::Dense { outputs, .. }] if *outputs == classes => {}
        _ => {
            return Err(corrupt(
                "expected a final dense layer with one output per class",
            ))
        }
    }
    Ok(Architecture {
        input_height: input.0,
        input_width: input.1,
        input_channels: input.2,
        blocks,
        hidden,
        dropout: dropout.unwrap_or(Architecture::DROPOUT),
        classes,
    })
}

pub fn decode_model(bytes: &[u8]) -> Result<CnnModel, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MODEL_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION as usize {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let input = (r.u32()?, r.u32()?, r.u32()?);
    let n_layers = r.u32()?;
    let mut specs = Vec::with_capacity(n_layers.min(1024));
    for _ in 0..n_layers {
        specs.push(match r.u8()? {
            1 => LayerSpec::Conv {
                size: r.u32()?,
                cin: r.u32()?,
                cout: r.u32()?,
            },
            2 => LayerSpec::BatchNorm { channels: r.u32()? },
            3 => LayerSpec::Relu,
            4 => LayerSpec::MaxPool,
            5 => LayerSpec::Flatten,
            6 => LayerSpec::Dense {
                inputs: r.u32()?,
                outputs: r.u32()?,
            },
            // shortest decimal form of the stored f32, so 0.23 reads back as 0.23
            7 => LayerSpec::Dropout {
                p: r.f32()?
                    .to_string()
                    .parse()
                    .expect("f32 display parses as f64"),
            },
            tag => return Err(corrupt(format!("unknown layer tag {tag}"))),
        });
    }
    let classes = r.u32()?;
    let seed = r.u64()?;
    let arch = architecture_from(&specs, input, classes)?;
    let reference = CnnModel::new(arch.clone(), seed)?;
    let expected: Vec<LayerSpec> = reference.layers().iter().map(Layer::spec).collect();
    let dropout_close = |a: &LayerSpec, b: &LayerSpec| match (a, b) {
        (LayerSpec::Dropout { p: x }, LayerSpec::Dropout { p: y }) => (x - y).abs() < 1e-6,
        _ => a == b,
    };
    if expected.len() != specs.len()
        || !expected
            .iter()
            .zip(&specs)
            .all(|(a, b)| dropout_close(a, b))
    {
        return Err(corrupt("layer shapes are inconsistent"));
    }
    let n_values = r.u64()? as usize;
    let mut layers: Vec<Layer> = specs
        .iter()
        .map(|s| -> Result<Layer, NnError> {
            Ok(match *s {
                LayerSpec::Conv { size, cin, cout } => Layer::Conv(Conv2d::new(size, cin, cout)?),
                LayerSpec::BatchNorm { channels } => Layer::BatchNorm(BatchNorm::new(channels)),
                LayerSpec::Relu => Layer::Relu(Relu::default()),
                LayerSpec::MaxPool => Layer::MaxPool(MaxPool2::default()),
                LayerSpec::Flatten => Layer::Flatten(Flatten::default()),
                LayerSpec::Dense { inputs, outputs } => Layer::Dense(Dense::new(inputs, outputs)),
                LayerSpec::Dropout { .. } => Layer::Dropout(Dropout::new(arch.dropout)?),
            })
        })
        .collect::<Result<_, _>>()?;
    let total: usize = layers
        .iter()
        .flat_map(|l| l.state())
        .map(<[f64]>::len)
        .sum();
    if total != n_values {
        return Err(corrupt(format!(
            "expected {total} values, header says {n_values}"
        )));
    }
    for layer in &mut layers {
        for buf in layer.state_mut() {
            for v in buf.iter_mut() {
                *v = r.f32()? as f64;
            }
        }
    }
    if r.pos != bytes.len() {
        return Err(corrupt("trailing bytes"));
    }
    Ok(CnnModel::from_parts(arch, layers, seed))
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes `model` to `path` and `meta` to the sidecar next to it.
pub fn save_checkpoint(
    path: &Path,
    model: &CnnModel,
    meta: &impl Serialize,
) -> Result<(), CheckpointError> {
    let io = |source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    };
    fs::write(path, encode_model(model)).map_err(io)?;
    let json = serde_json::to_vec_pretty(meta)?;
    let side = sidecar_path(path);
    fs::write(&side, json).map_err(|source| CheckpointError::Io { path: side, source })
}

pub fn load_checkpoint(path: &Path) -> Result<CnnModel, CheckpointError> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_model(&bytes)
}

/// The raw sidecar JSON of a checkpoint.
pub fn load_sidecar(path: &Path) -> Result<serde_json::Value, CheckpointError> {
    let side = sidecar_path(path);
    let bytes = fs::read(&side).map_err(|source| CheckpointError::Io { path: side, source })?;
    Ok(serde_json::from_slice(&bytes)?)
}

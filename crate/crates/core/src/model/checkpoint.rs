//! CNCK checkpoints.
//!
//! Layout: `CNCK`, u32 version, u32 header length, UTF-8 JSON header, then
//! every parameter tensor in header order as little-endian f32, row-major.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Layer, Sequential};
use crate::error::{Error, Result};
use crate::layers::{Activation, Conv2D, Dense, Dropout, Flatten, MaxPool2D, KERNEL, POOL};
use crate::tensor::{Scalar, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CNCK";
pub const CHECKPOINT_VERSION: u32 = 1;
const PREAMBLE: usize = 12;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    input_shape: Vec<usize>,
    classes: Vec<String>,
    layers: Vec<LayerDesc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum LayerDesc {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        activation: Activation,
        params: Vec<Vec<usize>>,
    },
    MaxPooling2d {
        pool: usize,
    },
    Dropout {
        rate: f64,
    },
    Flatten,
    Dense {
        inputs: usize,
        outputs: usize,
        activation: Activation,
        params: Vec<Vec<usize>>,
    },
}

/// A decoded checkpoint: the model and the class names it was trained on.
pub struct Checkpoint {
    pub model: Sequential<f32>,
    /// Label id → class name. Empty when saved without a dataset.
    pub classes: Vec<String>,
}

fn describe<T: Scalar>(layer: &Layer<T>) -> LayerDesc {
    match layer {
        Layer::Conv2D(l) => LayerDesc::Conv2d {
            in_channels: l.in_channels(),
            out_channels: l.out_channels(),
            kernel: KERNEL,
            activation: l.activation(),
            params: vec![l.weights().shape().to_vec(), l.bias().shape().to_vec()],
        },
        Layer::MaxPool2D(_) => LayerDesc::MaxPooling2d { pool: POOL },
        Layer::Dropout(d) => LayerDesc::Dropout { rate: d.rate() },
        Layer::Flatten(_) => LayerDesc::Flatten,
        Layer::Dense(l) => LayerDesc::Dense {
            inputs: l.inputs(),
            outputs: l.outputs(),
            activation: l.activation(),
            params: vec![l.weights().shape().to_vec(), l.bias().shape().to_vec()],
        },
    }
}

pub fn encode_checkpoint<T: Scalar>(model: &Sequential<T>, classes: &[String]) -> Result<Vec<u8>> {
    if !classes.is_empty() && classes.len() != model.num_classes() {
        return Err(Error::config(format!(
            "{} class names for a model with {} outputs",
            classes.len(),
            model.num_classes()
        )));
    }
    let header = Header {
        input_shape: model.input_shape().to_vec(),
        classes: classes.to_vec(),
        layers: model.layers().iter().map(describe).collect(),
    };
    let json = serde_json::to_vec(&header).expect("checkpoint header serializes");
    let payload_len: usize = model.params().iter().map(|p| p.len() * 4).sum();
    let mut out = Vec::with_capacity(PREAMBLE + json.len() + payload_len);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for p in model.params() {
        for &v in p.data() {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    Ok(out)
}

struct Payload<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Payload<'_> {
    fn take(&mut self, shape: &[usize]) -> Result<Tensor<f32>> {
        let n: usize = shape.iter().product();
        let end = self.pos + 4 * n;
        if end > self.bytes.len() {
            return Err(Error::format(
                self.bytes.len() as u64,
                format!("payload truncated: tensor {shape:?} needs bytes up to {end}"),
            ));
        }
        let data = self.bytes[self.pos..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        self.pos = end;
        Tensor::new(shape, data)
    }
}

fn expect_params(offset: u64, what: &str, declared: &[Vec<usize>], implied: [Vec<usize>; 2]) -> Result<()> {
    if declared != implied {
        return Err(Error::format(
            offset,
            format!("{what} declares parameter shapes {declared:?}, architecture implies {implied:?}"),
        ));
    }
    Ok(())
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::format(0, "missing CNCK magic"));
    }
    if bytes.len() < PREAMBLE {
        return Err(Error::format(bytes.len() as u64, "truncated preamble"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(4, format!("unsupported checkpoint version {version}")));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let header_end = PREAMBLE + header_len;
    if bytes.len() < header_end {
        return Err(Error::format(
            bytes.len() as u64,
            format!("header declares {header_len} bytes but the file ends early"),
        ));
    }
    let header: Header = serde_json::from_slice(&bytes[PREAMBLE..header_end]).map_err(|e| {
        let col = if e.line() == 1 { e.column().saturating_sub(1) } else { 0 };
        Error::format((PREAMBLE + col) as u64, format!("bad header: {e}"))
    })?;

    let hdr_off = PREAMBLE as u64;
    let mut payload = Payload {
        bytes,
        pos: header_end,
    };
    let mut layers = Vec::with_capacity(header.layers.len());
    for (i, desc) in header.layers.into_iter().enumerate() {
        let what = format!("layer {i}");
        layers.push(match desc {
            LayerDesc::Conv2d {
                in_channels,
                out_channels,
                kernel,
                activation,
                params,
            } => {
                if kernel != KERNEL {
                    return Err(Error::format(hdr_off, format!("{what}: unsupported kernel {kernel}")));
                }
                let implied = [vec![KERNEL, KERNEL, in_channels, out_channels], vec![out_channels]];
                expect_params(hdr_off, &what, &params, implied.clone())?;
                let w = payload.take(&implied[0])?;
                let b = payload.take(&implied[1])?;
                Layer::Conv2D(Conv2D::from_params(w, b, activation)?)
            }
            LayerDesc::MaxPooling2d { pool } => {
                if pool != POOL {
                    return Err(Error::format(hdr_off, format!("{what}: unsupported pool {pool}")));
                }
                Layer::MaxPool2D(MaxPool2D::new())
            }
            LayerDesc::Dropout { rate } => Layer::Dropout(
                Dropout::new(rate, 0).map_err(|e| Error::format(hdr_off, format!("{what}: {e}")))?,
            ),
            LayerDesc::Flatten => Layer::Flatten(Flatten::new()),
            LayerDesc::Dense {
                inputs,
                outputs,
                activation,
                params,
            } => {
                let implied = [vec![inputs, outputs], vec![outputs]];
                expect_params(hdr_off, &what, &params, implied.clone())?;
                let w = payload.take(&implied[0])?;
                let b = payload.take(&implied[1])?;
                Layer::Dense(Dense::from_params(w, b, activation)?)
            }
        });
    }
    if payload.pos != bytes.len() {
        return Err(Error::format(
            payload.pos as u64,
            format!("{} trailing bytes after the declared parameters", bytes.len() - payload.pos),
        ));
    }
    let model = Sequential::new(&header.input_shape, layers)
        .map_err(|e| Error::format(hdr_off, format!("architecture does not chain: {e}")))?;
    if !header.classes.is_empty() && header.classes.len() != model.num_classes() {
        return Err(Error::format(
            hdr_off,
            format!(
                "{} class names for a model with {} outputs",
                header.classes.len(),
                model.num_classes()
            ),
        ));
    }
    Ok(Checkpoint {
        model,
        classes: header.classes,
    })
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial file.
pub fn save_checkpoint<T: Scalar>(model: &Sequential<T>, classes: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(model, classes)?;
    write_atomic(path, &bytes)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

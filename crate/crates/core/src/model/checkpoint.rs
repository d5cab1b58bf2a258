//! Versioned checkpoint files.
//!
//! Layout: magic, format version, a length-prefixed JSON block with the
//! scalar configuration and validation metrics, an optional embedded
//! inhibition matrix (binary matrix encoding), then the parameter tensors.
//! Each tensor is tagged with its name and shape and stored as little-endian
//! 64-bit floats.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Head, ModelConfig, Params};
use crate::error::{Error, Result};
use crate::fretboard::FretboardConfig;
use crate::persist::{self, ByteReader, Encoding, MatrixFile};

const MAGIC: &[u8; 8] = b"TABCKPT\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: Params,
    pub iteration: usize,
    pub val_f_tab: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    fretboard: FretboardConfig,
    input_dim: usize,
    hidden_dim: usize,
    head: Head,
    lambda: f64,
    seed: u64,
    iteration: usize,
    val_f_tab: f64,
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_tensor(out: &mut Vec<u8>, name: &str, shape: &[usize], data: &[f64]) {
    put_str(out, name);
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &d in shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn get_tensor(r: &mut ByteReader<'_>, name: &str, shape: &[usize]) -> Result<Vec<f64>> {
    let found = r.string()?;
    if found != name {
        return Err(Error::Format(format!("expected tensor `{name}`, found `{found}`")));
    }
    let ndim = r.u32()? as usize;
    let dims = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    if dims != shape {
        return Err(Error::Format(format!(
            "tensor `{name}` has shape {dims:?}, configuration implies {shape:?}"
        )));
    }
    (0..shape.iter().product::<usize>()).map(|_| r.f64()).collect()
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let cfg = &self.config;
        let meta = Meta {
            fretboard: cfg.fretboard.clone(),
            input_dim: cfg.input_dim,
            hidden_dim: cfg.hidden_dim,
            head: cfg.head,
            lambda: cfg.lambda,
            seed: cfg.seed,
            iteration: self.iteration,
            val_f_tab: self.val_f_tab,
        };
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_str(&mut out, &serde_json::to_string(&meta).expect("metadata serializes"));
        match &cfg.inhibition {
            Some(w) => {
                out.push(1);
                let bytes = persist::encode(&MatrixFile::Inhibition(w.clone()), Encoding::Binary);
                out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
                out.extend_from_slice(&bytes);
            }
            None => out.push(0),
        }
        let p = &self.params;
        let [w1, b1, w2, b2] = p.slices();
        out.extend_from_slice(&4u32.to_le_bytes());
        put_tensor(&mut out, "w1", p.w1.shape(), w1);
        put_tensor(&mut out, "b1", p.b1.shape(), b1);
        put_tensor(&mut out, "w2", p.w2.shape(), w2);
        put_tensor(&mut out, "b2", p.b2.shape(), b2);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Format("not a checkpoint file".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let meta: Meta = serde_json::from_str(&r.string()?).map_err(|e| Error::Format(e.to_string()))?;
        let inhibition = match r.u8()? {
            0 => None,
            1 => {
                let len = r.u64()? as usize;
                Some(persist::decode(r.take(len)?)?.into_inhibition()?)
            }
            f => return Err(Error::Format(format!("bad inhibition flag {f}"))),
        };
        let config = ModelConfig {
            fretboard: meta.fretboard,
            input_dim: meta.input_dim,
            hidden_dim: meta.hidden_dim,
            head: meta.head,
            lambda: meta.lambda,
            inhibition,
            seed: meta.seed,
        };
        config.validate()?;
        let (i, h, c) = (config.input_dim, config.hidden_dim, config.num_combos());
        if r.u32()? != 4 {
            return Err(Error::Format("expected 4 parameter tensors".into()));
        }
        let w1 = get_tensor(&mut r, "w1", &[h, i])?;
        let b1 = get_tensor(&mut r, "b1", &[h])?;
        let w2 = get_tensor(&mut r, "w2", &[c, h])?;
        let b2 = get_tensor(&mut r, "b2", &[c])?;
        r.finish()?;
        let params = Params {
            w1: Array2::from_shape_vec((h, i), w1).expect("shape checked"),
            b1: Array1::from(b1),
            w2: Array2::from_shape_vec((c, h), w2).expect("shape checked"),
            b2: Array1::from(b2),
        };
        Ok(Checkpoint {
            config,
            params,
            iteration: meta.iteration,
            val_f_tab: meta.val_f_tab,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }
}

//! Binary checkpoint: `BTXE`, version (u32 LE), header length (u32 LE), JSON
//! header, then every tensor as little-endian f32 in manifest order.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::net::EditorModel;
use super::params::Params;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"BTXE";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Relative to the start of the data section.
    pub byte_offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config: ModelConfig,
    pub epoch: usize,
    pub dev_ppl: Option<f64>,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub epoch: usize,
    pub dev_ppl: Option<f64>,
}

pub fn checkpoint_bytes(model: &EditorModel<f32>, meta: CheckpointMeta) -> Result<Vec<u8>> {
    let mut tensors = Vec::new();
    let mut offset = 0u64;
    for (name, t) in model.params().iter() {
        tensors.push(TensorEntry {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            byte_offset: offset,
        });
        offset += 4 * t.len() as u64;
    }
    let header = CheckpointHeader {
        config: model.config.clone(),
        epoch: meta.epoch,
        dev_ppl: meta.dev_ppl,
        tensors,
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(12 + json.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for t in model.params().tensors() {
        for &x in t.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_checkpoint(model: &EditorModel<f32>, meta: CheckpointMeta, path: &Path) -> Result<()> {
    let bytes = checkpoint_bytes(model, meta)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn mismatch(detail: impl Into<String>) -> Error {
    Error::ManifestMismatch(detail.into())
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<(EditorModel<f32>, CheckpointMeta)> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    let word = |at: usize| -> Result<u32> {
        bytes
            .get(at..at + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| mismatch("file ends inside the preamble"))
    };
    let version = word(4)?;
    if version != VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let hlen = word(8)? as usize;
    let json = bytes
        .get(12..12 + hlen)
        .ok_or_else(|| mismatch("file ends inside the header"))?;
    let header: CheckpointHeader =
        serde_json::from_slice(json).map_err(|e| mismatch(format!("unreadable header: {e}")))?;
    let data = &bytes[12 + hlen..];
    let vocab = header
        .tensors
        .first()
        .filter(|t| t.name == "tok_emb" && t.shape.len() == 2)
        .map(|t| t.shape[0])
        .ok_or_else(|| mismatch("first tensor must be tok_emb"))?;
    let mut params = Params::new();
    let mut expected_offset = 0u64;
    for t in &header.tensors {
        if params.id(&t.name).is_some() {
            return Err(mismatch(format!("duplicate tensor {}", t.name)));
        }
        if t.shape.len() != 2 {
            return Err(mismatch(format!("{} is not 2-D", t.name)));
        }
        if t.byte_offset != expected_offset {
            return Err(mismatch(format!("{} has offset {}", t.name, t.byte_offset)));
        }
        let n = t.shape[0] * t.shape[1];
        let start = t.byte_offset as usize;
        let raw = data
            .get(start..start + 4 * n)
            .ok_or_else(|| mismatch(format!("data for {} is truncated", t.name)))?;
        let vals: Vec<f32> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let arr = Array2::from_shape_vec((t.shape[0], t.shape[1]), vals)
            .map_err(|e| mismatch(e.to_string()))?;
        params.add(t.name.clone(), arr);
        expected_offset += 4 * n as u64;
    }
    if data.len() as u64 != expected_offset {
        return Err(mismatch(format!(
            "data section is {} bytes, manifest covers {expected_offset}",
            data.len()
        )));
    }
    let model = EditorModel::from_params(header.config, vocab, params)?;
    Ok((
        model,
        CheckpointMeta {
            epoch: header.epoch,
            dev_ppl: header.dev_ppl,
        },
    ))
}

pub fn load_checkpoint(path: &Path) -> Result<(EditorModel<f32>, CheckpointMeta)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}

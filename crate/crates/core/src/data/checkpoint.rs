//! Checkpoint file: magic, little-endian `u64` manifest length, JSON
//! manifest, then every parameter as little-endian `f32` in index order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::labels::LabelScaling;
use super::record::tmp_path;
use crate::error::{Error, Result};
use crate::nn::{FusionModel, ModelConfig};
use crate::tensor::{HasParams, RngState};
use crate::train::TrainConfig;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"TRAITFU\x01";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub model: ModelConfig,
    pub train: Option<TrainConfig>,
    pub labels: LabelScaling,
    pub fold: Option<usize>,
    pub best_epoch: Option<usize>,
    pub params: Vec<ParamEntry>,
    pub blob_len: usize,
    pub blob_sha256: String,
}

/// What a checkpoint records besides the weights.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckpointMeta {
    pub train: Option<TrainConfig>,
    pub labels: LabelScaling,
    pub fold: Option<usize>,
    pub best_epoch: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub manifest: Manifest,
    pub model: FusionModel,
}

impl Checkpoint {
    pub fn meta(&self) -> CheckpointMeta {
        CheckpointMeta {
            train: self.manifest.train.clone(),
            labels: self.manifest.labels,
            fold: self.manifest.fold,
            best_epoch: self.manifest.best_epoch,
        }
    }
}

fn encode(model: &FusionModel, meta: &CheckpointMeta) -> Vec<u8> {
    let mut blob = Vec::new();
    let mut params = Vec::new();
    for p in model.params() {
        params.push(ParamEntry {
            name: p.name.clone(),
            shape: p.value.shape().to_vec(),
            offset: blob.len(),
        });
        for &v in p.value.data() {
            blob.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let manifest = Manifest {
        format_version: CHECKPOINT_VERSION,
        model: model.config().clone(),
        train: meta.train.clone(),
        labels: meta.labels,
        fold: meta.fold,
        best_epoch: meta.best_epoch,
        params,
        blob_len: blob.len(),
        blob_sha256: hex::encode(Sha256::digest(&blob)),
    };
    let header = serde_json::to_vec_pretty(&manifest).expect("manifest serialises");
    let mut out = Vec::with_capacity(MAGIC.len() + 8 + header.len() + blob.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&blob);
    out
}

/// Writes atomically (temporary file, then rename).
pub fn save_checkpoint(model: &FusionModel, meta: &CheckpointMeta, path: &Path) -> Result<()> {
    let bytes = encode(model, meta);
    let tmp = tmp_path(path);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

fn decode(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let fail = |msg: String| Error::Checkpoint {
        path: path.to_path_buf(),
        msg,
    };
    if bytes.len() < MAGIC.len() + 8 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(fail("not a checkpoint file".into()));
    }
    let len_bytes: [u8; 8] = bytes[MAGIC.len()..MAGIC.len() + 8].try_into().expect("8 bytes");
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let start = MAGIC.len() + 8;
    let header = bytes
        .get(start..start.saturating_add(header_len))
        .ok_or_else(|| fail("truncated manifest".into()))?;

    // Check the version before committing to the current schema.
    let raw: serde_json::Value = serde_json::from_slice(header).map_err(|e| fail(format!("bad manifest: {e}")))?;
    let version = raw
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| fail("manifest has no format_version".into()))?;
    if version != CHECKPOINT_VERSION as u64 {
        return Err(Error::Version {
            path: path.to_path_buf(),
            expected: CHECKPOINT_VERSION,
            found: version as u32,
        });
    }
    let manifest: Manifest = serde_json::from_value(raw).map_err(|e| fail(format!("bad manifest: {e}")))?;

    let blob = &bytes[start + header_len..];
    if blob.len() != manifest.blob_len {
        return Err(fail(format!(
            "truncated blob: expected {} bytes, found {}",
            manifest.blob_len,
            blob.len()
        )));
    }
    let found = hex::encode(Sha256::digest(blob));
    if found != manifest.blob_sha256 {
        return Err(Error::HashMismatch {
            path: path.to_path_buf(),
            expected: manifest.blob_sha256.clone(),
            found,
        });
    }

    manifest.model.validate()?;
    let mut model = FusionModel::new(&manifest.model, &mut RngState::new(0))?;
    let mut params = model.params_mut();
    if params.len() != manifest.params.len() {
        return Err(fail(format!(
            "manifest lists {} parameters, model has {}",
            manifest.params.len(),
            params.len()
        )));
    }
    for (p, entry) in params.iter_mut().zip(&manifest.params) {
        if p.name != entry.name || p.value.shape() != entry.shape.as_slice() {
            return Err(fail(format!(
                "parameter `{}` {:?} does not match model `{}` {:?}",
                entry.name,
                entry.shape,
                p.name,
                p.value.shape()
            )));
        }
        let n = p.value.len();
        let raw = blob
            .get(entry.offset..entry.offset + 4 * n)
            .ok_or_else(|| fail(format!("parameter `{}` runs past the blob", entry.name)))?;
        for (dst, c) in p.value.data_mut().iter_mut().zip(raw.chunks_exact(4)) {
            *dst = f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
        }
    }
    drop(params);
    Ok(Checkpoint { manifest, model })
}

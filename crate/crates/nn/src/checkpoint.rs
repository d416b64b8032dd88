//! `QNET0001` checkpoints.
//!
//! ```text
//! b"QNET0001" | u64 header_len | header JSON
//! | params f32[param_count] | buffers f32[buffer_count]
//! | (adam m f32[param_count] | adam v f32[param_count])?
//! ```
//!
//! Integers and floats are little-endian. Parameters follow layer order;
//! buffers are the batch-norm running means and variances in layer order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::float::Float;
use crate::network::{build_network, Network, NetworkSpec};
use crate::optim::{Adam, AdamConfig};

pub const MAGIC: &[u8; 8] = b"QNET0001";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub epochs: usize,
    pub loss_history: Vec<f64>,
    pub init_seed: u64,
    pub train_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerOffset {
    pub layer: usize,
    pub kind: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct OptimizerHeader {
    config: AdamConfig,
    step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    spec: NetworkSpec,
    param_count: usize,
    buffer_count: usize,
    layer_offsets: Vec<LayerOffset>,
    optimizer: Option<OptimizerHeader>,
    metadata: TrainingMetadata,
    blob_sha256: String,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub network: Network<f32>,
    pub optimizer: Option<Adam<f32>>,
    pub metadata: TrainingMetadata,
}

fn push_f32<T: Float>(out: &mut Vec<u8>, values: impl IntoIterator<Item = T>) {
    for v in values {
        out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
}

/// Serialises a network and optional optimizer state.
pub fn encode_checkpoint<T: Float>(
    network: &Network<T>,
    optimizer: Option<&Adam<T>>,
    metadata: &TrainingMetadata,
) -> Vec<u8> {
    let mut blob = Vec::new();
    push_f32(&mut blob, network.flat_params());
    push_f32(&mut blob, network.buffers().into_iter().flatten().copied());
    if let Some(adam) = optimizer {
        push_f32(&mut blob, adam.m.iter().flatten().copied());
        push_f32(&mut blob, adam.v.iter().flatten().copied());
    }
    let mut layer_offsets = Vec::new();
    let mut offset = 0;
    for (i, layer) in network.layers().iter().enumerate() {
        let len: usize = layer.params().iter().map(|p| p.len()).sum();
        if len > 0 {
            layer_offsets.push(LayerOffset {
                layer: i,
                kind: layer.kind_name().into(),
                offset,
                len,
            });
        }
        offset += len;
    }
    let header = Header {
        spec: network.spec().clone(),
        param_count: network.param_count(),
        buffer_count: network.buffers().iter().map(|b| b.len()).sum(),
        layer_offsets,
        optimizer: optimizer.map(|a| OptimizerHeader {
            config: a.config,
            step: a.step,
        }),
        metadata: metadata.clone(),
        blob_sha256: hex::encode(Sha256::digest(&blob)),
    };
    let json = serde_json::to_vec(&header).expect("header serialises");
    let mut out = Vec::with_capacity(16 + json.len() + blob.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&blob);
    out
}

pub fn save_checkpoint<T: Float>(
    network: &Network<T>,
    optimizer: Option<&Adam<T>>,
    metadata: &TrainingMetadata,
    path: &Path,
) -> Result<()> {
    fs::write(path, encode_checkpoint(network, optimizer, metadata)).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let bad = |reason: String| Error::Checkpoint {
        path: path.into(),
        reason,
    };
    if bytes.len() < 16 {
        return Err(bad("file too short for a checkpoint header".into()));
    }
    if &bytes[..8] != MAGIC {
        return Err(bad(format!(
            "unsupported version tag {:?}",
            String::from_utf8_lossy(&bytes[..8])
        )));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if header_len > body.len() {
        return Err(bad(format!("header length {header_len} exceeds file size")));
    }
    let header: Header =
        serde_json::from_slice(&body[..header_len]).map_err(|e| bad(format!("malformed header: {e}")))?;
    let blob = &body[header_len..];
    if hex::encode(Sha256::digest(blob)) != header.blob_sha256 {
        return Err(bad("parameter blob digest mismatch (corrupted file)".into()));
    }

    let derived = header.spec.param_count()?;
    if derived != header.param_count {
        return Err(Error::Spec(format!(
            "spec implies {derived} parameters but the checkpoint stores {}",
            header.param_count
        )));
    }
    let buffers = header.spec.buffer_count()?;
    if buffers != header.buffer_count {
        return Err(Error::Spec(format!(
            "spec implies {buffers} batch-norm statistics but the checkpoint stores {}",
            header.buffer_count
        )));
    }
    let moments = if header.optimizer.is_some() { 2 * derived } else { 0 };
    let expect = 4 * (derived + buffers + moments);
    if blob.len() != expect {
        return Err(bad(format!("blob holds {} bytes, expected {expect}", blob.len())));
    }
    let mut floats = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()));

    let mut network = build_network::<f32>(&header.spec, 0)?;
    for p in network.params_mut() {
        p.value = floats.by_ref().take(p.len()).collect();
    }
    for b in network.buffers_mut() {
        let len = b.len();
        *b = floats.by_ref().take(len).collect();
    }
    let optimizer = match header.optimizer {
        Some(OptimizerHeader { config, step }) => {
            let mut adam = Adam::new(&network, config).map_err(|e| bad(e.to_string()))?;
            adam.step = step;
            for m in adam.m.iter_mut() {
                let len = m.len();
                *m = floats.by_ref().take(len).collect();
            }
            for v in adam.v.iter_mut() {
                let len = v.len();
                *v = floats.by_ref().take(len).collect();
            }
            Some(adam)
        }
        None => None,
    };
    Ok(Checkpoint {
        network,
        optimizer,
        metadata: header.metadata,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })?;
    decode_checkpoint(&bytes, path)
}

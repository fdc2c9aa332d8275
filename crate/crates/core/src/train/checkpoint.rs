//! `MGCK` checkpoint files.
//!
//! Layout: magic `MGCK`, `u32` LE version, `u64` LE header length, a JSON
//! header, then every tensor as consecutive `f32` LE values. Tensor offsets
//! in the header count bytes from the start of the payload.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::model::Model;
use crate::error::{Error, Result};
use crate::graph::CooccurrenceCounts;
use crate::text::Vocab;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MGCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestMetric {
    pub metric: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config: RunConfig,
    pub genres: Vec<String>,
    pub vocab_size: usize,
    pub counts: CooccurrenceCounts,
    pub epoch: usize,
    pub best: BestMetric,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    /// Values of each directory entry, in directory order.
    pub data: Vec<Vec<f32>>,
}

impl Checkpoint {
    pub fn from_model(model: &Model<f32>, vocab_size: usize, epoch: usize, best: BestMetric) -> Self {
        let mut tensors = Vec::new();
        let mut data = Vec::new();
        let mut offset = 0u64;
        for (name, t) in model.state() {
            tensors.push(TensorEntry {
                name,
                shape: t.shape().to_vec(),
                offset,
            });
            offset += 4 * t.numel() as u64;
            data.push(t.to_vec());
        }
        Checkpoint {
            header: CheckpointHeader {
                config: model.config.clone(),
                genres: model.genres().to_vec(),
                vocab_size,
                counts: model.graph.counts.clone(),
                epoch,
                best,
                tensors,
            },
            data,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let payload: usize = self.data.iter().map(Vec::len).sum();
        let mut out = Vec::with_capacity(16 + header.len() + 4 * payload);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for v in self.data.iter().flatten() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let fail = |offset: usize, reason: String| Error::Format {
            path: path.to_path_buf(),
            offset: offset as u64,
            reason,
        };
        if bytes.len() < 16 {
            return Err(fail(bytes.len(), "truncated preamble".into()));
        }
        if &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(fail(0, format!("bad magic {:?}", &bytes[..4])));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let header_end = 16u64
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len() as u64)
            .ok_or_else(|| fail(8, format!("header length {header_len} runs past end of file")))? as usize;
        let header: CheckpointHeader =
            serde_json::from_slice(&bytes[16..header_end]).map_err(|e| fail(16, format!("bad header: {e}")))?;
        let payload = &bytes[header_end..];
        let mut expected = 0u64;
        let mut data = Vec::with_capacity(header.tensors.len());
        for t in &header.tensors {
            if t.offset != expected {
                return Err(fail(header_end, format!("tensor {} at offset {} (expected {expected})", t.name, t.offset)));
            }
            let len = t.shape.iter().try_fold(4u64, |acc, &d| acc.checked_mul(d as u64));
            let end = len.and_then(|l| expected.checked_add(l)).filter(|&e| e <= payload.len() as u64);
            let Some(end) = end else {
                return Err(fail(
                    header_end + expected as usize,
                    format!("tensor {} truncated", t.name),
                ));
            };
            data.push(
                payload[expected as usize..end as usize]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            );
            expected = end;
        }
        if expected != payload.len() as u64 {
            return Err(fail(
                header_end + expected as usize,
                format!("{} trailing bytes", payload.len() as u64 - expected),
            ));
        }
        Ok(Checkpoint { header, data })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.encode()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::decode(&fs::read(path)?, path)
    }

    /// Rebuilds the model and copies every stored tensor into it.
    pub fn to_model(&self, vocab: &Vocab) -> Result<Model<f32>> {
        let h = &self.header;
        if vocab.len() != h.vocab_size {
            return Err(Error::Config(format!(
                "vocabulary has {} tokens but the checkpoint was trained with {}",
                vocab.len(),
                h.vocab_size
            )));
        }
        let model = Model::new(&h.config, &h.genres, vocab, h.counts.clone())?;
        let state = model.state();
        if state.len() != h.tensors.len() {
            return Err(Error::Contract(format!(
                "checkpoint has {} tensors, the model expects {}",
                h.tensors.len(),
                state.len()
            )));
        }
        for ((name, t), (entry, values)) in state.iter().zip(h.tensors.iter().zip(&self.data)) {
            if name != &entry.name || t.shape() != entry.shape.as_slice() {
                return Err(Error::Contract(format!(
                    "checkpoint tensor {} {:?} does not match model tensor {name} {:?}",
                    entry.name,
                    entry.shape,
                    t.shape()
                )));
            }
            t.data_mut().copy_from_slice(values);
        }
        Ok(model)
    }
}

//! Tokenization, the persisted token vocabulary, and the frozen hash
//! embedding that stands in for a pretrained text encoder.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Float, Tensor};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Lowercases and splits on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Token → id map. Ids 0 and 1 are reserved for padding and unknown tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    ids: HashMap<String, u32>,
    tokens: Vec<String>,
}

impl Default for Vocab {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocab {
    pub fn new() -> Self {
        let mut v = Vocab {
            ids: HashMap::new(),
            tokens: Vec::new(),
        };
        v.insert(PAD_TOKEN);
        v.insert(UNK_TOKEN);
        v
    }

    /// Vocabulary over the tokens of `texts`, in first-seen order.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut v = Vocab::new();
        for text in texts {
            for tok in tokenize(text) {
                v.insert(&tok);
            }
        }
        v
    }

    pub fn insert(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.ids.insert(token.to_string(), id);
        self.tokens.push(token.to_string());
        id
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Tokenizes and maps to ids; unknown tokens become [`UNK_ID`].
    pub fn encode(&self, text: &str) -> Vec<u32> {
        tokenize(text).iter().map(|t| self.id(t).unwrap_or(UNK_ID)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let map: BTreeMap<&str, u32> = self.ids.iter().map(|(k, &v)| (k.as_str(), v)).collect();
        Ok(serde_json::to_string_pretty(&map)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let map: HashMap<String, u32> = serde_json::from_str(json)?;
        let mut tokens = vec![None; map.len()];
        for (tok, &id) in &map {
            let slot = tokens
                .get_mut(id as usize)
                .ok_or_else(|| Error::Config(format!("vocab ids must be dense; {tok:?} has id {id}")))?;
            *slot = Some(tok.clone());
        }
        let tokens: Vec<String> = tokens
            .into_iter()
            .collect::<Option<_>>()
            .ok_or_else(|| Error::Config("vocab ids must be dense".into()))?;
        if tokens.first().map(String::as_str) != Some(PAD_TOKEN) || tokens.get(1).map(String::as_str) != Some(UNK_TOKEN) {
            return Err(Error::Config(format!(
                "vocab must map {PAD_TOKEN} to 0 and {UNK_TOKEN} to 1"
            )));
        }
        Ok(Vocab { ids: map, tokens })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Open-interval uniform in (0, 1) from 53 hash bits.
fn unit_open(h: u64) -> f64 {
    ((h >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// Frozen token table: id → `dim` Gaussian components derived from a seeded
/// hash, scaled by `1/√dim` so vectors have roughly unit norm. The padding
/// id embeds to zeros. Nothing here is trainable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrozenEmbedder {
    pub seed: u64,
    pub dim: usize,
    pub vocab_size: usize,
}

impl FrozenEmbedder {
    pub fn new(seed: u64, dim: usize, vocab_size: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dim must be positive".into()));
        }
        Ok(FrozenEmbedder {
            seed,
            dim,
            vocab_size,
        })
    }

    pub fn embed_id(&self, id: u32) -> Result<Vec<f64>> {
        if id as usize >= self.vocab_size {
            return Err(Error::Input(format!(
                "token id {id} outside vocabulary of {}",
                self.vocab_size
            )));
        }
        if id == PAD_ID {
            return Ok(vec![0.0; self.dim]);
        }
        let scale = 1.0 / (self.dim as f64).sqrt();
        let base = splitmix64(self.seed ^ splitmix64(id as u64));
        let mut out = Vec::with_capacity(self.dim + 1);
        for pair in 0..self.dim.div_ceil(2) as u64 {
            let u1 = unit_open(splitmix64(base ^ (2 * pair)));
            let u2 = unit_open(splitmix64(base ^ (2 * pair + 1)));
            let r = (-2.0 * u1.ln()).sqrt();
            let theta = 2.0 * std::f64::consts::PI * u2;
            out.push(r * theta.cos() * scale);
            out.push(r * theta.sin() * scale);
        }
        out.truncate(self.dim);
        Ok(out)
    }

    /// `[B, L, dim]` constant tensor for a batch of equal-length sequences.
    pub fn embed_batch<T: Float>(&self, batch: &[Vec<u32>]) -> Result<Tensor<T>> {
        let len = batch.first().map_or(0, Vec::len);
        if len == 0 {
            return Err(Error::Input("empty token sequence".into()));
        }
        if batch.iter().any(|s| s.len() != len) {
            return Err(Error::Input("token sequences in a batch must share a length".into()));
        }
        let mut data = Vec::with_capacity(batch.len() * len * self.dim);
        for seq in batch {
            for &id in seq {
                data.extend(self.embed_id(id)?.into_iter().map(T::lit));
            }
        }
        Tensor::from_vec(data, &[batch.len(), len, self.dim])
    }

    /// `[L, dim]` for one sequence.
    pub fn embed_sequence<T: Float>(&self, ids: &[u32]) -> Result<Tensor<T>> {
        let t = self.embed_batch(&[ids.to_vec()])?;
        t.reshape(&[ids.len(), self.dim])
    }
}

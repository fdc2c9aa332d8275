//! Per-modality encoders.
//!
//! * [`AudioEncoder`]: stacked `conv3x3 → ReLU → maxpool2x2` blocks over the
//!   mel image, then a mean over the remaining frequency rows, leaving one
//!   feature vector per (pooled) time step.
//! * [`LyricsEncoder`]: frozen hash embedding followed by a trainable linear
//!   adapter.
//! * [`genre_node_features`]: frozen embedding of genre names, mean-pooled
//!   over their tokens.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Linear, NamedParams, ParamInit};
use crate::tensor::{Float, Tensor};
use crate::text::{tokenize, FrozenEmbedder, Vocab, PAD_ID};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AudioEncoderConfig {
    /// Output channels of each block; the block count sets the time
    /// downsampling factor `2^blocks`.
    pub channels: Vec<usize>,
}

impl Default for AudioEncoderConfig {
    fn default() -> Self {
        AudioEncoderConfig {
            channels: vec![16, 32, 64, 64, 128],
        }
    }
}

impl AudioEncoderConfig {
    pub fn out_dim(&self) -> usize {
        self.channels.last().copied().unwrap_or(0)
    }

    pub fn min_frames(&self) -> usize {
        1 << self.channels.len()
    }

    /// Steps in the output sequence for `frames` input columns.
    pub fn out_steps(&self, frames: usize) -> usize {
        self.channels.iter().fold(frames, |t, _| t.div_ceil(2))
    }
}

struct ConvBlock<T: Float> {
    weight: Tensor<T>,
    bias: Tensor<T>,
}

pub struct AudioEncoder<T: Float> {
    config: AudioEncoderConfig,
    blocks: Vec<ConvBlock<T>>,
}

impl<T: Float> AudioEncoder<T> {
    pub fn new(config: &AudioEncoderConfig, init: &ParamInit) -> Result<Self> {
        if config.channels.is_empty() || config.channels.contains(&0) {
            return Err(Error::Config(format!("bad audio channels {:?}", config.channels)));
        }
        let mut c_in = 1;
        let mut blocks = Vec::new();
        for (i, &c_out) in config.channels.iter().enumerate() {
            let bound = (6.0 / (9 * c_in) as f64).sqrt();
            blocks.push(ConvBlock {
                weight: init.uniform(&format!("audio.conv{i}.weight"), &[c_out, c_in, 3, 3], bound)?,
                bias: init.constant(&[c_out], 0.0)?,
            });
            c_in = c_out;
        }
        Ok(AudioEncoder {
            config: config.clone(),
            blocks,
        })
    }

    pub fn config(&self) -> &AudioEncoderConfig {
        &self.config
    }

    pub fn out_dim(&self) -> usize {
        self.config.out_dim()
    }

    /// `[B, 1, mels, T]` → `[B, ceil(T / 2^blocks), C]`.
    pub fn forward(&self, mel: &Tensor<T>) -> Result<Tensor<T>> {
        let (b, t) = match mel.shape() {
            &[b, 1, _, t] => (b, t),
            s => return Err(Error::shape("audio_encode", s, &[0, 1, 0, 0])),
        };
        if t < self.config.min_frames() {
            return Err(Error::Input(format!(
                "mel has {t} frames; the audio encoder needs at least {}",
                self.config.min_frames()
            )));
        }
        let mut x = mel.clone();
        for block in &self.blocks {
            x = x.conv2d_3x3(&block.weight, &block.bias)?.relu()?.max_pool2x2()?;
        }
        // [B, C, F', T'] -> mean over F' -> [B, C, T'] -> [B, T', C]
        let pooled = x.mean_axis(2)?;
        let out = pooled.transpose(1, 2)?;
        debug_assert_eq!(out.shape(), [b, self.config.out_steps(t), self.out_dim()]);
        Ok(out)
    }

    pub fn push_params(&self, out: &mut NamedParams<T>) {
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("audio.conv{i}.weight"), b.weight.clone()));
            out.push((format!("audio.conv{i}.bias"), b.bias.clone()));
        }
    }
}

pub struct LyricsEncoder<T: Float> {
    pub embedder: FrozenEmbedder,
    pub adapter: Linear<T>,
}

impl<T: Float> LyricsEncoder<T> {
    pub fn new(embedder: FrozenEmbedder, out_dim: usize, init: &ParamInit) -> Result<Self> {
        Ok(LyricsEncoder {
            embedder,
            adapter: Linear::new(init, "lyrics.adapter", embedder.dim, out_dim, true)?,
        })
    }

    pub fn out_dim(&self) -> usize {
        self.adapter.out_dim()
    }

    /// The frozen part alone: `[B, L, E]`, never tracked for gradients.
    pub fn embed_frozen(&self, tokens: &[Vec<u32>]) -> Result<Tensor<T>> {
        self.embedder.embed_batch(tokens)
    }

    /// `[B, L]` token ids → `[B, L, out_dim]`.
    pub fn forward(&self, tokens: &[Vec<u32>]) -> Result<Tensor<T>> {
        self.adapter.forward(&self.embed_frozen(tokens)?)
    }

    pub fn push_params(&self, out: &mut NamedParams<T>) {
        self.adapter.push_params("lyrics.adapter", out);
    }
}

/// Mean over the sequence axis: `[B, L, C]` → `[B, C]` (or `[L, C]` → `[C]`).
pub fn pool_embedding<T: Float>(seq: &Tensor<T>) -> Result<Tensor<T>> {
    match seq.shape() {
        &[_, l, _] if l > 0 => seq.mean_axis(1),
        &[l, _] if l > 0 => seq.mean_axis(0),
        s => Err(Error::Input(format!("pool_embedding needs a non-empty sequence, got {s:?}"))),
    }
}

/// Valid (non-padding) positions of a `[B, L]` batch of sequences. A row
/// with no valid position counts every position as valid, so pooling and
/// attention over it stay defined.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeqMask {
    batch: usize,
    len: usize,
    valid: Vec<bool>,
}

impl SeqMask {
    pub fn from_tokens(tokens: &[Vec<u32>]) -> Result<Self> {
        let len = tokens.first().map_or(0, Vec::len);
        if tokens.iter().any(|s| s.len() != len) {
            return Err(Error::Input("token sequences in a batch must share a length".into()));
        }
        let mut valid = Vec::with_capacity(tokens.len() * len);
        for seq in tokens {
            if seq.iter().all(|&id| id == PAD_ID) {
                valid.extend(std::iter::repeat_n(true, len));
            } else {
                valid.extend(seq.iter().map(|&id| id != PAD_ID));
            }
        }
        Ok(SeqMask {
            batch: tokens.len(),
            len,
            valid,
        })
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_valid(&self, b: usize, i: usize) -> bool {
        self.valid[b * self.len + i]
    }

    fn check(&self, op: &'static str, batch: usize, len: usize) -> Result<()> {
        if (batch, len) != (self.batch, self.len) {
            return Err(Error::shape(op, &[batch, len], &[self.batch, self.len]));
        }
        Ok(())
    }

    /// Mean over the valid positions: `[B, L, C]` → `[B, C]`.
    pub fn pool<T: Float>(&self, seq: &Tensor<T>) -> Result<Tensor<T>> {
        let &[b, l, c] = seq.shape() else {
            return Err(Error::shape("masked_pool", seq.shape(), &[self.batch, self.len, 0]));
        };
        self.check("masked_pool", b, l)?;
        let mut weights = Vec::with_capacity(b * l * c);
        for row in self.valid.chunks(l.max(1)) {
            let w = T::one() / T::lit(row.iter().filter(|&&v| v).count() as f64);
            for &v in row {
                weights.extend(std::iter::repeat_n(if v { w } else { T::zero() }, c));
            }
        }
        seq.mul(&Tensor::from_vec(weights, &[b, l, c])?)?.sum_axis(1)
    }

    /// Additive score bias `[B·heads, queries, L]`: zero at valid keys and a
    /// large negative value at padding, so softmax gives padding no weight.
    pub fn attention_bias<T: Float>(&self, heads: usize, queries: usize) -> Result<Tensor<T>> {
        let mut bias = Vec::with_capacity(self.batch * heads * queries * self.len);
        for row in self.valid.chunks(self.len.max(1)) {
            for _ in 0..heads * queries {
                bias.extend(row.iter().map(|&v| if v { T::zero() } else { T::lit(-1e9) }));
            }
        }
        Tensor::from_vec(bias, &[self.batch * heads, queries, self.len])
    }
}

/// One row per genre: the mean frozen embedding of the name's tokens.
pub fn genre_node_features(names: &[String], vocab: &Vocab, embedder: &FrozenEmbedder) -> Result<Vec<Vec<f64>>> {
    let mut seen = HashSet::new();
    for n in names {
        if n.trim().is_empty() {
            return Err(Error::Config("empty genre name".into()));
        }
        if !seen.insert(n.as_str()) {
            return Err(Error::Config(format!("duplicate genre name {n:?}")));
        }
    }
    names
        .iter()
        .map(|name| {
            let tokens = tokenize(name);
            if tokens.is_empty() {
                return Err(Error::Config(format!("genre name {name:?} has no tokens")));
            }
            let mut row = vec![0.0; embedder.dim];
            for tok in &tokens {
                let id = vocab
                    .id(tok)
                    .ok_or_else(|| Error::Input(format!("genre token {tok:?} missing from vocabulary")))?;
                for (r, v) in row.iter_mut().zip(embedder.embed_id(id)?) {
                    *r += v;
                }
            }
            row.iter_mut().for_each(|r| *r /= tokens.len() as f64);
            Ok(row)
        })
        .collect()
}

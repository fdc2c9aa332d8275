//! Cross-modal attention fusion.
//!
//! Each branch lets one modality query the other:
//! `softmax(Q_α K_βᵀ / √d) V_β`, with `Q_α` projected from the querying
//! sequence and `K_β`, `V_β` from the attended one. The audio branch queries
//! lyrics, the lyrics branch queries audio; both outputs are mean-pooled,
//! concatenated, and projected to the classifier width.

use serde::{Deserialize, Serialize};

use crate::encoders::{pool_embedding, SeqMask};
use crate::error::{Error, Result};
use crate::nn::{Linear, NamedParams, ParamInit};
use crate::tensor::{Float, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    /// Shared attention width `d`.
    pub attn_dim: usize,
    pub heads: usize,
    /// Fused representation width `D`.
    pub out_dim: usize,
    /// Use one set of projections for both branches (needs equal input widths).
    pub share_branch_weights: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            attn_dim: 64,
            heads: 1,
            out_dim: 64,
            share_branch_weights: false,
        }
    }
}

/// Query/key/value projections for one attention direction.
#[derive(Clone)]
pub struct CrossModalAttention<T: Float> {
    pub query: Linear<T>,
    pub key: Linear<T>,
    pub value: Linear<T>,
    pub heads: usize,
}

fn batched<T: Float>(x: &Tensor<T>) -> Result<(Tensor<T>, bool)> {
    match x.ndim() {
        3 => Ok((x.clone(), false)),
        2 => {
            let s = x.shape();
            Ok((x.reshape(&[1, s[0], s[1]])?, true))
        }
        _ => Err(Error::shape("cross_modal_attention", x.shape(), &[0, 0, 0])),
    }
}

impl<T: Float> CrossModalAttention<T> {
    pub fn new(init: &ParamInit, name: &str, query_dim: usize, kv_dim: usize, dim: usize, heads: usize) -> Result<Self> {
        if heads == 0 || !dim.is_multiple_of(heads) {
            return Err(Error::Config(format!("attention dim {dim} not divisible by {heads} heads")));
        }
        Ok(CrossModalAttention {
            query: Linear::new(init, &format!("{name}.q"), query_dim, dim, true)?,
            key: Linear::new(init, &format!("{name}.k"), kv_dim, dim, true)?,
            value: Linear::new(init, &format!("{name}.v"), kv_dim, dim, true)?,
            heads,
        })
    }

    pub fn dim(&self) -> usize {
        self.query.out_dim()
    }

    /// `[B, m, d] → [B·h, m, d/h]`
    fn split_heads(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        if self.heads == 1 {
            return Ok(x.clone());
        }
        let (b, m, d) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let dh = d / self.heads;
        x.reshape(&[b, m, self.heads, dh])?
            .permute(&[0, 2, 1, 3])?
            .reshape(&[b * self.heads, m, dh])
    }

    fn merge_heads(&self, x: &Tensor<T>, b: usize) -> Result<Tensor<T>> {
        if self.heads == 1 {
            return Ok(x.clone());
        }
        let (m, dh) = (x.shape()[1], x.shape()[2]);
        x.reshape(&[b, self.heads, m, dh])?
            .permute(&[0, 2, 1, 3])?
            .reshape(&[b, m, self.heads * dh])
    }

    fn check_dims(&self, query_seq: &Tensor<T>, kv_seq: &Tensor<T>) -> Result<()> {
        let (q, kv) = (query_seq.shape(), kv_seq.shape());
        if q[0] != kv[0] || q[2] != self.query.in_dim() || kv[2] != self.key.in_dim() || q[1] == 0 || kv[1] == 0 {
            return Err(Error::shape("cross_modal_attention", q, kv));
        }
        Ok(())
    }

    /// Attention weights `[B·h, m, n]` (rows sum to one).
    pub fn weights(&self, query_seq: &Tensor<T>, kv_seq: &Tensor<T>) -> Result<Tensor<T>> {
        self.masked_weights(query_seq, kv_seq, None)
    }

    /// [`weights`](Self::weights) with padded keys given zero weight.
    pub fn masked_weights(&self, query_seq: &Tensor<T>, kv_seq: &Tensor<T>, key_mask: Option<&SeqMask>) -> Result<Tensor<T>> {
        let (q_in, _) = batched(query_seq)?;
        let (kv_in, _) = batched(kv_seq)?;
        self.check_dims(&q_in, &kv_in)?;
        let q = self.split_heads(&self.query.forward(&q_in)?)?;
        let k = self.split_heads(&self.key.forward(&kv_in)?)?;
        let head_dim = q.shape()[2];
        let scale = T::one() / T::lit(head_dim as f64).sqrt();
        let mut scores = q.bmm(&k.transpose(1, 2)?)?.scale(scale)?;
        if let Some(mask) = key_mask {
            let (b, m, n) = (q_in.shape()[0], q_in.shape()[1], kv_in.shape()[1]);
            if (mask.batch(), mask.len()) != (b, n) {
                return Err(Error::shape("cross_modal_attention", &[mask.batch(), mask.len()], &[b, n]));
            }
            scores = scores.add(&mask.attention_bias(self.heads, m)?)?;
        }
        scores.softmax_rows()
    }

    /// `query_seq` `[B, m, dq]`, `kv_seq` `[B, n, dkv]` → `[B, m, d]`.
    /// Unbatched `[m, dq]` / `[n, dkv]` inputs give `[m, d]`.
    pub fn forward(&self, query_seq: &Tensor<T>, kv_seq: &Tensor<T>) -> Result<Tensor<T>> {
        self.masked_forward(query_seq, kv_seq, None)
    }

    /// [`forward`](Self::forward) attending only to the valid keys of `key_mask`.
    pub fn masked_forward(&self, query_seq: &Tensor<T>, kv_seq: &Tensor<T>, key_mask: Option<&SeqMask>) -> Result<Tensor<T>> {
        let (q_in, squeeze) = batched(query_seq)?;
        let (kv_in, _) = batched(kv_seq)?;
        self.check_dims(&q_in, &kv_in)?;
        let b = q_in.shape()[0];
        let attn = self.masked_weights(&q_in, &kv_in, key_mask)?;
        let v = self.split_heads(&self.value.forward(&kv_in)?)?;
        let out = self.merge_heads(&attn.bmm(&v)?, b)?;
        if squeeze {
            let s = out.shape().to_vec();
            out.reshape(&[s[1], s[2]])
        } else {
            Ok(out)
        }
    }

    pub fn push_params(&self, prefix: &str, out: &mut NamedParams<T>) {
        self.query.push_params(&format!("{prefix}.q"), out);
        self.key.push_params(&format!("{prefix}.k"), out);
        self.value.push_params(&format!("{prefix}.v"), out);
    }
}

/// Two mirrored attention branches plus the output projection.
pub struct SymmetricFusion<T: Float> {
    pub audio_to_lyrics: CrossModalAttention<T>,
    pub lyrics_to_audio: CrossModalAttention<T>,
    pub proj: Linear<T>,
    shared: bool,
}

impl<T: Float> SymmetricFusion<T> {
    pub fn new(config: &FusionConfig, audio_dim: usize, lyrics_dim: usize, init: &ParamInit) -> Result<Self> {
        let d = config.attn_dim;
        let a2l = CrossModalAttention::new(init, "fusion.a2l", audio_dim, lyrics_dim, d, config.heads)?;
        let l2a = if config.share_branch_weights {
            if audio_dim != lyrics_dim {
                return Err(Error::Config(format!(
                    "shared branch weights need equal widths, got audio {audio_dim} and lyrics {lyrics_dim}"
                )));
            }
            a2l.clone()
        } else {
            CrossModalAttention::new(init, "fusion.l2a", lyrics_dim, audio_dim, d, config.heads)?
        };
        Ok(SymmetricFusion {
            audio_to_lyrics: a2l,
            lyrics_to_audio: l2a,
            proj: Linear::new(init, "fusion.proj", 2 * d, config.out_dim, true)?,
            shared: config.share_branch_weights,
        })
    }

    /// Pooled branch outputs `([B, d], [B, d])`: audio querying lyrics, and
    /// lyrics querying audio. With a mask, padded lyric tokens are neither
    /// attended to nor pooled.
    pub fn branches(
        &self,
        audio_seq: &Tensor<T>,
        lyrics_seq: &Tensor<T>,
        lyrics_mask: Option<&SeqMask>,
    ) -> Result<(Tensor<T>, Tensor<T>)> {
        let a = self.audio_to_lyrics.masked_forward(audio_seq, lyrics_seq, lyrics_mask)?;
        let l = self.lyrics_to_audio.forward(lyrics_seq, audio_seq)?;
        Ok((pool_embedding(&a)?, pool_lyrics(&l, lyrics_mask)?))
    }

    /// `[B, T', Ca]`, `[B, L, El]` → `[B, D]`.
    pub fn forward(&self, audio_seq: &Tensor<T>, lyrics_seq: &Tensor<T>, lyrics_mask: Option<&SeqMask>) -> Result<Tensor<T>> {
        let (a, l) = self.branches(audio_seq, lyrics_seq, lyrics_mask)?;
        let axis = a.ndim() - 1;
        self.proj.forward(&Tensor::concat(&[a, l], axis)?)
    }

    pub fn push_params(&self, out: &mut NamedParams<T>) {
        self.audio_to_lyrics.push_params("fusion.a2l", out);
        if !self.shared {
            self.lyrics_to_audio.push_params("fusion.l2a", out);
        }
        self.proj.push_params("fusion.proj", out);
    }
}

fn pool_lyrics<T: Float>(seq: &Tensor<T>, mask: Option<&SeqMask>) -> Result<Tensor<T>> {
    match mask {
        Some(m) => m.pool(seq),
        None => pool_embedding(seq),
    }
}

/// Ablation baseline: mean-pool each modality, concatenate, project.
pub struct ConcatFusion<T: Float> {
    pub proj: Linear<T>,
}

impl<T: Float> ConcatFusion<T> {
    pub fn new(config: &FusionConfig, audio_dim: usize, lyrics_dim: usize, init: &ParamInit) -> Result<Self> {
        Ok(ConcatFusion {
            proj: Linear::new(init, "fusion.concat", audio_dim + lyrics_dim, config.out_dim, true)?,
        })
    }

    pub fn forward(&self, audio_seq: &Tensor<T>, lyrics_seq: &Tensor<T>, lyrics_mask: Option<&SeqMask>) -> Result<Tensor<T>> {
        let a = pool_embedding(audio_seq)?;
        let l = pool_lyrics(lyrics_seq, lyrics_mask)?;
        let axis = a.ndim() - 1;
        self.proj.forward(&Tensor::concat(&[a, l], axis)?)
    }

    pub fn push_params(&self, out: &mut NamedParams<T>) {
        self.proj.push_params("fusion.concat", out);
    }
}

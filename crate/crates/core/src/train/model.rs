use crate::encoders::{genre_node_features, pool_embedding, AudioEncoder, LyricsEncoder, SeqMask};
use crate::error::{Error, Result};
use crate::fusion::{ConcatFusion, SymmetricFusion};
use crate::graph::{CooccurrenceCounts, GcnHead, GenreGraph, LinearHead};
use crate::losses::{bce_loss, total_loss, ProjectionHeads};
use crate::nn::{NamedParams, ParamInit};
use crate::tensor::{Float, Tensor};
use crate::text::{FrozenEmbedder, Vocab};

use super::config::RunConfig;

pub enum Fusion<T: Float> {
    Symmetric(SymmetricFusion<T>),
    Concat(ConcatFusion<T>),
}

pub enum Head<T: Float> {
    Gcn(GcnHead<T>),
    Linear(LinearHead<T>),
}

/// Clamped log-odds of each genre's training frequency.
pub fn prior_logits(counts: &CooccurrenceCounts) -> Vec<f64> {
    let n = counts.num_samples.max(1) as f64;
    counts
        .occurrences
        .iter()
        .map(|&c| {
            let p = (c as f64 / n).clamp(1e-3, 1.0 - 1e-3);
            (p / (1.0 - p)).ln()
        })
        .collect()
}

/// Forward outputs for one batch.
pub struct Outputs<T: Float> {
    pub logits: Tensor<T>,
    pub audio_pooled: Tensor<T>,
    pub lyrics_pooled: Tensor<T>,
}

pub struct Losses<T: Float> {
    pub total: Tensor<T>,
    pub bce: f64,
    pub align: Option<f64>,
}

/// The assembled classifier, with the ablation switches of its config
/// deciding which fusion and head are built.
pub struct Model<T: Float> {
    pub config: RunConfig,
    pub graph: GenreGraph,
    pub audio: AudioEncoder<T>,
    pub lyrics: LyricsEncoder<T>,
    pub fusion: Fusion<T>,
    pub head: Head<T>,
    pub align: ProjectionHeads<T>,
}

impl<T: Float> Model<T> {
    /// `counts` are training-split co-occurrence counts; they feed the genre
    /// graph and the prior-logit bias of the head.
    pub fn new(config: &RunConfig, genres: &[String], vocab: &Vocab, counts: CooccurrenceCounts) -> Result<Self> {
        config.validate()?;
        if counts.num_genres() != genres.len() {
            return Err(Error::shape("model", &[genres.len()], &[counts.num_genres()]));
        }
        let init = ParamInit::new(config.seed);
        let embedder = FrozenEmbedder::new(config.text.embed_seed, config.text.embed_dim, vocab.len())?;
        let features = genre_node_features(genres, vocab, &embedder)?;
        let graph = GenreGraph::build(genres.to_vec(), features, counts, config.graph.denominator)?;
        let prior = prior_logits(&graph.counts);

        let audio = AudioEncoder::new(&config.audio, &init)?;
        let lyrics = LyricsEncoder::new(embedder, config.text.out_dim, &init)?;
        let (a_dim, l_dim) = (audio.out_dim(), lyrics.out_dim());
        let fusion = if config.ablation.use_scma {
            Fusion::Symmetric(SymmetricFusion::new(&config.fusion, a_dim, l_dim, &init)?)
        } else {
            Fusion::Concat(ConcatFusion::new(&config.fusion, a_dim, l_dim, &init)?)
        };
        let head = if config.ablation.use_gcem {
            Head::Gcn(GcnHead::new(&config.graph, &graph, config.fusion.out_dim, &prior, &init)?)
        } else {
            Head::Linear(LinearHead::new(config.fusion.out_dim, &prior, &init)?)
        };
        let align = ProjectionHeads::new(&config.loss, a_dim, l_dim, &init)?;
        Ok(Model {
            config: config.clone(),
            graph,
            audio,
            lyrics,
            fusion,
            head,
            align,
        })
    }

    pub fn genres(&self) -> &[String] {
        &self.graph.genres
    }

    /// `mel` is `[B, 1, mels, frames]`; `tokens` are `B` equal-length rows,
    /// with padding excluded from attention and pooling.
    pub fn forward(&self, mel: &Tensor<T>, tokens: &[Vec<u32>]) -> Result<Outputs<T>> {
        let audio_seq = self.audio.forward(mel)?;
        let lyrics_seq = self.lyrics.forward(tokens)?;
        let mask = SeqMask::from_tokens(tokens)?;
        let fused = match &self.fusion {
            Fusion::Symmetric(f) => f.forward(&audio_seq, &lyrics_seq, Some(&mask))?,
            Fusion::Concat(f) => f.forward(&audio_seq, &lyrics_seq, Some(&mask))?,
        };
        let logits = match &self.head {
            Head::Gcn(h) => h.forward(&fused)?,
            Head::Linear(h) => h.forward(&fused)?,
        };
        Ok(Outputs {
            logits,
            audio_pooled: pool_embedding(&audio_seq)?,
            lyrics_pooled: mask.pool(&lyrics_seq)?,
        })
    }

    /// Composite objective for one batch. The alignment term is only built
    /// when it carries weight.
    pub fn loss(&self, outputs: &Outputs<T>, labels: &Tensor<T>) -> Result<Losses<T>> {
        let lambda = self.config.effective_lambda();
        let bce = bce_loss(&outputs.logits, labels)?;
        let align = if lambda > 0.0 {
            Some(self.align.loss(&outputs.audio_pooled, &outputs.lyrics_pooled)?)
        } else {
            None
        };
        Ok(Losses {
            bce: bce.item()?.as_f64(),
            align: align.as_ref().map(|a| a.item().map(|v| v.as_f64())).transpose()?,
            total: total_loss(align.as_ref(), &bce, lambda)?,
        })
    }

    /// Trainable tensors in a fixed order.
    pub fn parameters(&self) -> NamedParams<T> {
        let mut out = Vec::new();
        self.audio.push_params(&mut out);
        self.lyrics.push_params(&mut out);
        match &self.fusion {
            Fusion::Symmetric(f) => f.push_params(&mut out),
            Fusion::Concat(f) => f.push_params(&mut out),
        }
        match &self.head {
            Head::Gcn(h) => h.push_params(&mut out),
            Head::Linear(h) => h.push_params(&mut out),
        }
        self.align.push_params(&mut out);
        out
    }

    /// Fixed tensors saved alongside the parameters.
    pub fn buffers(&self) -> NamedParams<T> {
        let mut out = Vec::new();
        if let Head::Gcn(h) = &self.head {
            h.push_buffers(&mut out);
        }
        out
    }

    /// Parameters followed by buffers.
    pub fn state(&self) -> NamedParams<T> {
        let mut s = self.parameters();
        s.extend(self.buffers());
        s
    }
}

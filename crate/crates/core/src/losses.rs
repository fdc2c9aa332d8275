//! Training objectives.
//!
//! The alignment loss is a symmetric InfoNCE over in-batch pairs: audio and
//! lyrics embeddings are projected into a shared space, the `B×B` similarity
//! matrix is divided by a learnable temperature, and each matched pair is
//! scored by cross-entropy along rows (audio → lyrics) and along columns
//! (lyrics → audio). The two directions are averaged.
//!
//! The composite objective is `λ·L_align + (1 − λ)·L_bce`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Linear, NamedParams, ParamInit};
use crate::tensor::{Float, Tensor};

pub const TAU_MIN: f64 = 0.01;
pub const TAU_MAX: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub lambda: f64,
    pub tau_init: f64,
    pub proj_dim: usize,
    /// L2-normalize projections before the dot product.
    pub normalize: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda: 0.3,
            tau_init: 0.07,
            proj_dim: 32,
            normalize: true,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        if !(TAU_MIN..=TAU_MAX).contains(&self.tau_init) {
            return Err(Error::Config(format!(
                "loss.tau_init {} outside [{TAU_MIN}, {TAU_MAX}]",
                self.tau_init
            )));
        }
        if self.proj_dim == 0 {
            return Err(Error::Config("loss.proj_dim must be positive".into()));
        }
        Ok(())
    }
}

pub fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!("lambda {lambda} outside [0, 1]")));
    }
    Ok(())
}

/// The two projection maps and the log-temperature.
pub struct ProjectionHeads<T: Float> {
    pub audio: Linear<T>,
    pub lyrics: Linear<T>,
    pub log_temperature: Tensor<T>,
    pub normalize: bool,
}

impl<T: Float> ProjectionHeads<T> {
    pub fn new(config: &LossConfig, audio_dim: usize, lyrics_dim: usize, init: &ParamInit) -> Result<Self> {
        config.validate()?;
        Ok(ProjectionHeads {
            audio: Linear::new(init, "align.audio", audio_dim, config.proj_dim, false)?,
            lyrics: Linear::new(init, "align.lyrics", lyrics_dim, config.proj_dim, false)?,
            log_temperature: Tensor::parameter(vec![T::lit(config.tau_init.ln())], &[1])?,
            normalize: config.normalize,
        })
    }

    /// Current temperature after clamping.
    pub fn temperature(&self) -> f64 {
        self.log_temperature.data()[0].as_f64().exp().clamp(TAU_MIN, TAU_MAX)
    }

    /// `[B, Ca]`, `[B, Cl]` → `(E_a, E_l)`, each `[B, p]`.
    pub fn project(&self, audio: &Tensor<T>, lyrics: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        let a = self.audio.forward(audio)?;
        let l = self.lyrics.forward(lyrics)?;
        if self.normalize {
            Ok((a.l2_normalize()?, l.l2_normalize()?))
        } else {
            Ok((a, l))
        }
    }

    pub fn loss(&self, audio: &Tensor<T>, lyrics: &Tensor<T>) -> Result<Tensor<T>> {
        let (a, l) = self.project(audio, lyrics)?;
        contrastive_loss(&a, &l, &self.log_temperature)
    }

    pub fn push_params(&self, out: &mut NamedParams<T>) {
        self.audio.push_params("align.audio", out);
        self.lyrics.push_params("align.lyrics", out);
        out.push(("align.log_temperature".into(), self.log_temperature.clone()));
    }
}

/// `S = E_a · E_lᵀ`, `[B, B]`.
pub fn similarity_matrix<T: Float>(e_a: &Tensor<T>, e_l: &Tensor<T>) -> Result<Tensor<T>> {
    if e_a.ndim() != 2 || e_a.shape() != e_l.shape() || e_a.shape()[0] == 0 {
        return Err(Error::shape("similarity", e_a.shape(), e_l.shape()));
    }
    e_a.matmul(&e_l.t()?)
}

/// Both directional terms from already temperature-scaled logits:
/// `(L_{A→L}, L_{L→A})`.
pub fn directional_losses<T: Float>(logits: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
    let b = match logits.shape() {
        &[m, n] if m == n && m > 0 => m,
        s => return Err(Error::shape("contrastive", s, &[0, 0])),
    };
    let diag: Vec<usize> = (0..b).collect();
    let term = |m: &Tensor<T>| -> Result<Tensor<T>> { m.log_softmax_rows()?.select_per_row(&diag)?.mean_all()?.neg() };
    Ok((term(logits)?, term(&logits.t()?)?))
}

fn average_terms<T: Float>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let (a2l, l2a) = directional_losses(logits)?;
    a2l.add(&l2a)?.scale(T::lit(0.5))
}

/// Symmetric InfoNCE with `τ = exp(log_temperature)` clamped to
/// `[TAU_MIN, TAU_MAX]`; gradients flow to the embeddings and, inside the
/// clamp range, to `log_temperature`.
pub fn contrastive_loss<T: Float>(e_a: &Tensor<T>, e_l: &Tensor<T>, log_temperature: &Tensor<T>) -> Result<Tensor<T>> {
    let inv_tau = log_temperature
        .clamp(T::lit(TAU_MIN.ln()), T::lit(TAU_MAX.ln()))?
        .neg()?
        .exp()?;
    average_terms(&similarity_matrix(e_a, e_l)?.mul_scalar(&inv_tau)?)
}

/// Same loss at a fixed temperature.
pub fn contrastive_loss_fixed<T: Float>(e_a: &Tensor<T>, e_l: &Tensor<T>, tau: f64) -> Result<Tensor<T>> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Config(format!("temperature must be positive, got {tau}")));
    }
    average_terms(&similarity_matrix(e_a, e_l)?.scale(T::lit(1.0 / tau))?)
}

/// Mean stable BCE over every entry.
pub fn bce_loss<T: Float>(logits: &Tensor<T>, targets: &Tensor<T>) -> Result<Tensor<T>> {
    logits.bce_with_logits(targets)
}

/// `λ·align + (1 − λ)·bce`. The endpoints return the surviving term itself,
/// so `λ = 0` never touches the alignment graph.
pub fn total_loss<T: Float>(align: Option<&Tensor<T>>, bce: &Tensor<T>, lambda: f64) -> Result<Tensor<T>> {
    check_lambda(lambda)?;
    if lambda == 0.0 {
        return Ok(bce.clone());
    }
    let align = align.ok_or_else(|| Error::Contract("lambda > 0 needs an alignment loss".into()))?;
    if lambda == 1.0 {
        return Ok(align.clone());
    }
    align.scale(T::lit(lambda))?.add(&bce.scale(T::lit(1.0 - lambda))?)
}

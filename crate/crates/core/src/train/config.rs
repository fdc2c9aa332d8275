use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::DataConfig;
use crate::dsp::MelConfig;
use crate::encoders::AudioEncoderConfig;
use crate::error::{Error, Result};
use crate::fusion::FusionConfig;
use crate::graph::GcnConfig;
use crate::losses::LossConfig;
use crate::tensor::{LrSchedule, OptimizerKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextConfig {
    /// Width of the frozen token embedding.
    pub embed_dim: usize,
    /// Width of the trainable adapter output.
    pub out_dim: usize,
    /// Seed of the frozen embedding table (independent of the run seed).
    pub embed_seed: u64,
}

impl Default for TextConfig {
    fn default() -> Self {
        TextConfig {
            embed_dim: 64,
            out_dim: 64,
            embed_seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimConfig {
    pub lr: f64,
    pub halve_every: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            lr: 1e-4,
            halve_every: 50,
            batch_size: 16,
            epochs: 60,
            optimizer: OptimizerKind::default(),
        }
    }
}

impl OptimConfig {
    pub fn schedule(&self) -> LrSchedule {
        LrSchedule {
            base_lr: self.lr,
            halve_every: self.halve_every,
        }
    }
}

/// Component switches. All on is the full model; all off is concat fusion,
/// a linear head and BCE alone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    pub use_al_loss: bool,
    pub use_scma: bool,
    pub use_gcem: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Ablation {
            use_al_loss: true,
            use_scma: true,
            use_gcem: true,
        }
    }
}

impl Ablation {
    pub const NONE: Ablation = Ablation {
        use_al_loss: false,
        use_scma: false,
        use_gcem: false,
    };

    /// Turns off each component named in a comma list of `al-loss`, `scma`,
    /// `gcem`.
    pub fn disable(mut self, list: &str) -> Result<Self> {
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "al-loss" => self.use_al_loss = false,
                "scma" => self.use_scma = false,
                "gcem" => self.use_gcem = false,
                other => {
                    return Err(Error::Config(format!(
                        "unknown component {other:?}; expected al-loss, scma or gcem"
                    )))
                }
            }
        }
        Ok(self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub threshold: f64,
    pub batch_size: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            threshold: 0.5,
            batch_size: 64,
        }
    }
}

/// Everything a run needs. Missing fields take their defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// Seed of the train/val/test shuffle, kept apart from the model seed so
    /// several seeds can share one split.
    pub split_seed: u64,
    pub data: DataConfig,
    pub mel: MelConfig,
    pub audio: AudioEncoderConfig,
    pub text: TextConfig,
    pub fusion: FusionConfig,
    pub graph: GcnConfig,
    pub loss: LossConfig,
    pub optim: OptimConfig,
    pub ablation: Ablation,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.data.split.validate()?;
        self.mel.validate()?;
        if self.optim.batch_size == 0 || self.eval.batch_size == 0 {
            return Err(Error::Config("batch sizes must be at least 1".into()));
        }
        if !(self.optim.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.optim.lr)));
        }
        if !(0.0..=1.0).contains(&self.eval.threshold) {
            return Err(Error::Config(format!("threshold {} outside [0, 1]", self.eval.threshold)));
        }
        if self.text.embed_dim == 0 || self.text.out_dim == 0 || self.fusion.attn_dim == 0 || self.fusion.out_dim == 0 {
            return Err(Error::Config("model widths must be positive".into()));
        }
        if self.fusion.heads == 0 || !self.fusion.attn_dim.is_multiple_of(self.fusion.heads) {
            return Err(Error::Config(format!(
                "attention width {} is not divisible by {} heads",
                self.fusion.attn_dim, self.fusion.heads
            )));
        }
        Ok(())
    }

    /// The alignment weight actually applied: zero when the loss is ablated.
    pub fn effective_lambda(&self) -> f64 {
        if self.ablation.use_al_loss {
            self.loss.lambda
        } else {
            0.0
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

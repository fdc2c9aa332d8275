//! Parameter initialization and the dense layer shared by every module.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::tensor::{Float, Tensor};

/// Named parameter list, in a fixed order.
pub type NamedParams<T> = Vec<(String, Tensor<T>)>;

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Seeded initializer. Each parameter draws from its own stream keyed by
/// name, so adding or removing a module leaves every other tensor unchanged.
#[derive(Clone, Copy, Debug)]
pub struct ParamInit {
    pub seed: u64,
}

impl ParamInit {
    pub fn new(seed: u64) -> Self {
        ParamInit { seed }
    }

    pub fn rng_for(&self, name: &str) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(fnv1a(name));
        rng
    }

    pub fn uniform<T: Float>(&self, name: &str, shape: &[usize], bound: f64) -> Result<Tensor<T>> {
        let n = shape.iter().product();
        let mut rng = self.rng_for(name);
        let dist = Uniform::new_inclusive(-bound, bound);
        let data = (0..n).map(|_| T::lit(dist.sample(&mut rng))).collect();
        Tensor::parameter(data, shape)
    }

    pub fn constant<T: Float>(&self, shape: &[usize], value: f64) -> Result<Tensor<T>> {
        let n = shape.iter().product();
        Tensor::parameter(vec![T::lit(value); n], shape)
    }
}

/// `y = x·W + b` over the last axis; `W` is `[in, out]`.
#[derive(Clone, Debug)]
pub struct Linear<T: Float> {
    pub weight: Tensor<T>,
    pub bias: Option<Tensor<T>>,
}

impl<T: Float> Linear<T> {
    /// Glorot-uniform weights, zero bias.
    pub fn new(init: &ParamInit, name: &str, fan_in: usize, fan_out: usize, bias: bool) -> Result<Self> {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        Ok(Linear {
            weight: init.uniform(&format!("{name}.weight"), &[fan_in, fan_out], bound)?,
            bias: if bias {
                Some(init.constant(&[fan_out], 0.0)?)
            } else {
                None
            },
        })
    }

    /// All-zero weights and bias.
    pub fn zeros(init: &ParamInit, fan_in: usize, fan_out: usize) -> Result<Self> {
        Ok(Linear {
            weight: init.constant(&[fan_in, fan_out], 0.0)?,
            bias: Some(init.constant(&[fan_out], 0.0)?),
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = x.matmul(&self.weight)?;
        match &self.bias {
            Some(b) => y.add_bias(b),
            None => Ok(y),
        }
    }

    pub fn push_params(&self, prefix: &str, out: &mut NamedParams<T>) {
        out.push((format!("{prefix}.weight"), self.weight.clone()));
        if let Some(b) = &self.bias {
            out.push((format!("{prefix}.bias"), b.clone()));
        }
    }
}

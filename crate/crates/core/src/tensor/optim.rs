//! Gradient-descent optimizers with a step-halving learning-rate schedule.

use serde::{Deserialize, Serialize};

use super::{Float, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// `base_lr × 0.5^floor(epoch / halve_every)`; `halve_every == 0` keeps it constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub halve_every: usize,
}

impl LrSchedule {
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if self.halve_every == 0 {
            return self.base_lr;
        }
        let halvings = (epoch / self.halve_every).min(i32::MAX as usize) as i32;
        self.base_lr * 0.5f64.powi(halvings)
    }
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            base_lr: 1e-4,
            halve_every: 50,
        }
    }
}

struct Moments<T> {
    first: Vec<T>,
    second: Vec<T>,
}

/// Optimizer state: schedule, step counter, and per-parameter moment buffers
/// (aligned with the parameter slice passed to [`Optimizer::step`]).
pub struct Optimizer<T: Float> {
    kind: OptimizerKind,
    schedule: LrSchedule,
    step_count: u64,
    moments: Vec<Moments<T>>,
}

impl<T: Float> Optimizer<T> {
    pub fn new(kind: OptimizerKind, schedule: LrSchedule) -> Result<Self> {
        if !(schedule.base_lr > 0.0 && schedule.base_lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                schedule.base_lr
            )));
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = kind {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps <= 0.0 {
                return Err(Error::Config(format!("bad Adam hyperparameters {kind:?}")));
            }
        }
        Ok(Optimizer {
            kind,
            schedule,
            step_count: 0,
            moments: Vec::new(),
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn schedule(&self) -> LrSchedule {
        self.schedule
    }

    /// Updates `params` in place from their gradients at the given epoch.
    pub fn step(&mut self, params: &[Tensor<T>], epoch: usize) -> Result<()> {
        let grads = params
            .iter()
            .enumerate()
            .map(|(i, p)| {
                p.grad()
                    .ok_or_else(|| Error::Contract(format!("parameter {i} has no gradient")))
            })
            .collect::<Result<Vec<_>>>()?;

        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|p| Moments {
                    first: vec![T::zero(); p.numel()],
                    second: vec![T::zero(); p.numel()],
                })
                .collect();
        }
        if self.moments.len() != params.len()
            || self.moments.iter().zip(params).any(|(m, p)| m.first.len() != p.numel())
        {
            return Err(Error::Contract(
                "parameter set changed between optimizer steps".into(),
            ));
        }

        self.step_count += 1;
        let lr = self.schedule.lr_at(epoch);
        match self.kind {
            OptimizerKind::Sgd => {
                let lr = T::lit(lr);
                for (p, g) in params.iter().zip(&grads) {
                    p.data_mut().iter_mut().zip(g).for_each(|(w, &g)| *w -= lr * g);
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = self.step_count as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                let (b1, b2, eps) = (T::lit(beta1), T::lit(beta2), T::lit(eps));
                let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
                let step_size = T::lit(lr / c1);
                let c2_sqrt = T::lit(c2.sqrt());
                for ((p, g), m) in params.iter().zip(&grads).zip(&mut self.moments) {
                    let mut w = p.data_mut();
                    for (((w, &g), m1), m2) in w
                        .iter_mut()
                        .zip(g)
                        .zip(m.first.iter_mut())
                        .zip(m.second.iter_mut())
                    {
                        *m1 = b1 * *m1 + one_b1 * g;
                        *m2 = b2 * *m2 + one_b2 * g * g;
                        *w -= step_size * *m1 / ((*m2).sqrt() / c2_sqrt + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_single_step() {
        let p = Tensor::<f64>::parameter(vec![1.0], &[1]).unwrap();
        p.mul(&Tensor::scalar(1.0).reshape(&[1]).unwrap())
            .unwrap()
            .sum_all()
            .unwrap()
            .backward()
            .unwrap();
        let sched = LrSchedule {
            base_lr: 0.1,
            halve_every: 0,
        };
        let mut opt = Optimizer::new(OptimizerKind::Sgd, sched).unwrap();
        opt.step(&[p.clone()], 0).unwrap();
        assert!((p.to_vec()[0] - 0.9).abs() < 1e-15);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn schedule_halves_every_fifty_epochs() {
        let s = LrSchedule::default();
        assert_eq!(s.lr_at(0), 1e-4);
        assert_eq!(s.lr_at(49), 1e-4);
        assert_eq!(s.lr_at(50), 5e-5);
        assert_eq!(s.lr_at(100), 2.5e-5);
        assert_eq!(s.lr_at(149), 2.5e-5);
    }

    #[test]
    fn missing_gradient_is_contract_error() {
        let p = Tensor::<f32>::parameter(vec![1.0], &[1]).unwrap();
        let mut opt = Optimizer::new(OptimizerKind::default(), LrSchedule::default()).unwrap();
        assert!(matches!(opt.step(&[p], 0), Err(Error::Contract(_))));
    }

    #[test]
    fn rejects_non_positive_lr() {
        let sched = LrSchedule {
            base_lr: 0.0,
            halve_every: 50,
        };
        assert!(Optimizer::<f32>::new(OptimizerKind::Sgd, sched).is_err());
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        // With bias correction the first Adam step is lr * sign(g).
        let p = Tensor::<f64>::parameter(vec![2.0, -1.0], &[2]).unwrap();
        p.mul(&p).unwrap().sum_all().unwrap().backward().unwrap();
        let sched = LrSchedule {
            base_lr: 0.01,
            halve_every: 50,
        };
        let mut opt = Optimizer::new(OptimizerKind::default(), sched).unwrap();
        opt.step(&[p.clone()], 0).unwrap();
        let w = p.to_vec();
        assert!((w[0] - 1.99).abs() < 1e-8);
        assert!((w[1] + 0.99).abs() < 1e-8);
    }
}

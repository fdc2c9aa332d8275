//! Central finite-difference gradient checking in `f64`.
//!
//! The numeric side only ever calls the forward closure, so it is independent
//! of every backward implementation it is used to verify.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{no_grad, Tensor};
use crate::error::Result;

/// Components whose gradients are smaller than this are compared on an
/// absolute rather than relative scale.
pub const RELATIVE_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// (input index, flat coordinate, analytic, numeric) of the worst component.
    pub worst: Option<(usize, usize, f64, f64)>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

pub struct GradCheck {
    pub step: f64,
    /// Coordinates probed per input; `None` probes all of them.
    pub max_coords: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheck {
    fn default() -> Self {
        GradCheck {
            step: 1e-6,
            max_coords: None,
            seed: 0,
        }
    }
}

impl GradCheck {
    /// Compares backward gradients of `loss()` against central differences
    /// for each tensor in `inputs` (which must require gradients).
    pub fn run<F>(&self, inputs: &[Tensor<f64>], loss: F) -> Result<GradCheckReport>
    where
        F: Fn() -> Result<Tensor<f64>>,
    {
        inputs.iter().for_each(Tensor::zero_grad);
        loss()?.backward()?;
        let analytic: Vec<Vec<f64>> = inputs
            .iter()
            .map(|t| t.grad().unwrap_or_else(|| vec![0.0; t.numel()]))
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut report = GradCheckReport::default();
        for (k, input) in inputs.iter().enumerate() {
            let n = input.numel();
            let coords: Vec<usize> = match self.max_coords {
                Some(m) if m < n => {
                    let mut c = sample(&mut rng, n, m).into_vec();
                    c.sort_unstable();
                    c
                }
                _ => (0..n).collect(),
            };
            for idx in coords {
                let original = input.data()[idx];
                input.data_mut()[idx] = original + self.step;
                let plus = no_grad(|| loss().and_then(|t| t.item()));
                input.data_mut()[idx] = original - self.step;
                let minus = no_grad(|| loss().and_then(|t| t.item()));
                input.data_mut()[idx] = original;
                let numeric = (plus? - minus?) / (2.0 * self.step);
                let a = analytic[k][idx];
                let err = relative_error(a, numeric);
                report.checked += 1;
                if err > report.max_rel_error || report.worst.is_none() {
                    report.max_rel_error = report.max_rel_error.max(err);
                    if err >= report.max_rel_error {
                        report.worst = Some((k, idx, a, numeric));
                    }
                }
            }
        }
        inputs.iter().for_each(Tensor::clear_grad);
        Ok(report)
    }
}

use super::elementwise::sigmoid;
use super::{same_shape, Float, Tensor};
use crate::error::{Error, Result};

fn last_axis<T: Float>(t: &Tensor<T>, op: &'static str) -> Result<usize> {
    match t.shape().last() {
        Some(&n) if n > 0 => Ok(n),
        _ => Err(Error::shape(op, t.shape(), &[])),
    }
}

impl<T: Float> Tensor<T> {
    /// Softmax along the last axis, with per-row max subtraction.
    pub fn softmax_rows(&self) -> Result<Self> {
        let n = last_axis(self, "softmax_rows")?;
        let mut out = self.to_vec();
        if out.iter().any(|v| v.is_nan()) {
            return Err(Error::NonFinite { op: "softmax_rows" });
        }
        for row in out.chunks_mut(n) {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut sum = T::zero();
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            row.iter_mut().for_each(|v| *v /= sum);
        }
        Tensor::from_op(
            "softmax_rows",
            out,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(move |ctx| {
                let mut g = vec![T::zero(); ctx.out.len()];
                for ((gi, go), y) in g.chunks_mut(n).zip(ctx.grad.chunks(n)).zip(ctx.out.chunks(n)) {
                    let dot: T = go.iter().zip(y).map(|(&a, &b)| a * b).sum();
                    for ((d, &a), &b) in gi.iter_mut().zip(go).zip(y) {
                        *d = b * (a - dot);
                    }
                }
                vec![Some(g)]
            }),
        )
    }

    /// Log-softmax along the last axis via log-sum-exp.
    pub fn log_softmax_rows(&self) -> Result<Self> {
        let n = last_axis(self, "log_softmax_rows")?;
        let mut out = self.to_vec();
        if out.iter().any(|v| v.is_nan()) {
            return Err(Error::NonFinite { op: "log_softmax_rows" });
        }
        for row in out.chunks_mut(n) {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
            row.iter_mut().for_each(|v| *v -= lse);
        }
        Tensor::from_op(
            "log_softmax_rows",
            out,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(move |ctx| {
                let mut g = vec![T::zero(); ctx.out.len()];
                for ((gi, go), y) in g.chunks_mut(n).zip(ctx.grad.chunks(n)).zip(ctx.out.chunks(n)) {
                    let total: T = go.iter().copied().sum();
                    for ((d, &a), &b) in gi.iter_mut().zip(go).zip(y) {
                        *d = a - b.exp() * total;
                    }
                }
                vec![Some(g)]
            }),
        )
    }

    /// Picks `x[i, index[i]]` from a `[m, n]` matrix, giving `[m]`.
    pub fn select_per_row(&self, index: &[usize]) -> Result<Self> {
        let (m, n) = match self.shape() {
            &[m, n] if index.len() == m => (m, n),
            s => return Err(Error::shape("select_per_row", s, &[index.len()])),
        };
        if let Some(&bad) = index.iter().find(|&&j| j >= n) {
            return Err(Error::Input(format!("select_per_row: column {bad} out of range {n}")));
        }
        let data = {
            let x = self.data();
            index.iter().enumerate().map(|(i, &j)| x[i * n + j]).collect()
        };
        let index = index.to_vec();
        Tensor::from_op(
            "select_per_row",
            data,
            vec![m],
            vec![self.clone()],
            Box::new(move |ctx| {
                let mut g = vec![T::zero(); m * n];
                for (i, &j) in index.iter().enumerate() {
                    g[i * n + j] = ctx.grad[i];
                }
                vec![Some(g)]
            }),
        )
    }

    /// Mean binary cross-entropy on logits, in the overflow-free form
    /// `max(x,0) - x*y + ln(1 + e^{-|x|})`. Targets must be exactly 0 or 1.
    pub fn bce_with_logits(&self, targets: &Self) -> Result<Self> {
        same_shape("bce_with_logits", self.shape(), targets.shape())?;
        let y = targets.to_vec();
        if let Some(bad) = y.iter().find(|&&v| v != T::zero() && v != T::one()) {
            return Err(Error::Input(format!("non-binary target {bad}")));
        }
        let count = self.numel();
        if count == 0 {
            return Err(Error::Input("bce on empty tensor".into()));
        }
        let total: T = self
            .data()
            .iter()
            .zip(&y)
            .map(|(&x, &t)| x.max(T::zero()) - x * t + (-x.abs()).exp().ln_1p())
            .sum();
        let inv = T::one() / T::lit(count as f64);
        Tensor::from_op(
            "bce_with_logits",
            vec![total * inv],
            Vec::new(),
            vec![self.clone(), targets.clone()],
            Box::new(move |ctx| {
                let x = ctx.inputs[0].data();
                let scale = ctx.grad[0] * inv;
                let g = x.iter().zip(&y).map(|(&x, &t)| (sigmoid(x) - t) * scale).collect();
                vec![Some(g), None]
            }),
        )
    }

    /// Scales each last-axis row to unit Euclidean norm.
    pub fn l2_normalize(&self) -> Result<Self> {
        let n = last_axis(self, "l2_normalize")?;
        let eps = T::lit(1e-12);
        let x = self.to_vec();
        let norms: Vec<T> = x
            .chunks(n)
            .map(|r| r.iter().map(|&v| v * v).sum::<T>().sqrt().max(eps))
            .collect();
        let out: Vec<T> = x
            .chunks(n)
            .zip(&norms)
            .flat_map(|(r, &nrm)| r.iter().map(move |&v| v / nrm))
            .collect();
        Tensor::from_op(
            "l2_normalize",
            out,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(move |ctx| {
                let mut g = vec![T::zero(); ctx.out.len()];
                for (((gi, go), y), &nrm) in g
                    .chunks_mut(n)
                    .zip(ctx.grad.chunks(n))
                    .zip(ctx.out.chunks(n))
                    .zip(&norms)
                {
                    let dot: T = go.iter().zip(y).map(|(&a, &b)| a * b).sum();
                    for ((d, &a), &b) in gi.iter_mut().zip(go).zip(y) {
                        *d = (a - b * dot) / nrm;
                    }
                }
                vec![Some(g)]
            }),
        )
    }
}

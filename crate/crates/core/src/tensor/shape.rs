use super::{Float, Tensor};
use crate::error::{Error, Result};

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// For each output position, the flat index it reads in the input.
fn permute_index(shape: &[usize], axes: &[usize]) -> Vec<usize> {
    let in_strides = strides(shape);
    let out_shape: Vec<usize> = axes.iter().map(|&a| shape[a]).collect();
    let n: usize = shape.iter().product();
    let mut index = Vec::with_capacity(n);
    let mut counter = vec![0usize; out_shape.len()];
    for _ in 0..n {
        index.push(counter.iter().zip(axes).map(|(&c, &a)| c * in_strides[a]).sum());
        for d in (0..counter.len()).rev() {
            counter[d] += 1;
            if counter[d] < out_shape[d] {
                break;
            }
            counter[d] = 0;
        }
    }
    index
}

impl<T: Float> Tensor<T> {
    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        if shape.iter().product::<usize>() != self.numel() {
            return Err(Error::shape("reshape", self.shape(), shape));
        }
        Tensor::from_op(
            "reshape",
            self.to_vec(),
            shape.to_vec(),
            vec![self.clone()],
            Box::new(|ctx| vec![Some(ctx.grad.to_vec())]),
        )
    }

    /// Reorders axes: output axis `i` is input axis `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        let nd = self.ndim();
        let mut seen = vec![false; nd];
        if axes.len() != nd || axes.iter().any(|&a| a >= nd || std::mem::replace(&mut seen[a], true)) {
            return Err(Error::shape("permute", self.shape(), axes));
        }
        let index = permute_index(self.shape(), axes);
        let data = {
            let x = self.data();
            index.iter().map(|&i| x[i]).collect()
        };
        let shape = axes.iter().map(|&a| self.shape()[a]).collect();
        let n = self.numel();
        Tensor::from_op(
            "permute",
            data,
            shape,
            vec![self.clone()],
            Box::new(move |ctx| {
                let mut g = vec![T::zero(); n];
                for (o, &i) in index.iter().enumerate() {
                    g[i] = ctx.grad[o];
                }
                vec![Some(g)]
            }),
        )
    }

    /// Swaps two axes.
    pub fn transpose(&self, a: usize, b: usize) -> Result<Self> {
        let mut axes: Vec<usize> = (0..self.ndim()).collect();
        if a >= axes.len() || b >= axes.len() {
            return Err(Error::shape("transpose", self.shape(), &[a, b]));
        }
        axes.swap(a, b);
        self.permute(&axes)
    }

    /// Matrix transpose of a rank-2 tensor.
    pub fn t(&self) -> Result<Self> {
        if self.ndim() != 2 {
            return Err(Error::shape("t", self.shape(), &[2]));
        }
        self.transpose(0, 1)
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(parts: &[Self], axis: usize) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Input("concat of zero tensors".into()))?;
        let base = first.shape();
        if axis >= base.len() {
            return Err(Error::shape("concat", base, &[axis]));
        }
        for p in parts {
            let s = p.shape();
            let ok = s.len() == base.len()
                && s.iter().zip(base).enumerate().all(|(d, (x, y))| d == axis || x == y);
            if !ok {
                return Err(Error::shape("concat", base, s));
            }
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let widths: Vec<usize> = parts.iter().map(|p| p.shape()[axis] * inner).collect();
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(outer * total);
        {
            let guards: Vec<_> = parts.iter().map(|p| p.data()).collect();
            for o in 0..outer {
                for (g, &w) in guards.iter().zip(&widths) {
                    out.extend_from_slice(&g[o * w..(o + 1) * w]);
                }
            }
        }
        let mut shape = base.to_vec();
        shape[axis] = parts.iter().map(|p| p.shape()[axis]).sum();
        Tensor::from_op(
            "concat",
            out,
            shape,
            parts.to_vec(),
            Box::new(move |ctx| {
                let mut grads: Vec<Vec<T>> = widths.iter().map(|&w| Vec::with_capacity(outer * w)).collect();
                for o in 0..outer {
                    let mut offset = o * total;
                    for (g, &w) in grads.iter_mut().zip(&widths) {
                        g.extend_from_slice(&ctx.grad[offset..offset + w]);
                        offset += w;
                    }
                }
                grads.into_iter().map(Some).collect()
            }),
        )
    }
}

use super::{Float, Tensor};
use crate::error::{Error, Result};

/// Splits `shape` around `axis` into (outer, len, inner) extents.
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

impl<T: Float> Tensor<T> {
    pub fn sum_all(&self) -> Result<Self> {
        let total = self.data().iter().copied().sum();
        let n = self.numel();
        Tensor::from_op(
            "sum_all",
            vec![total],
            Vec::new(),
            vec![self.clone()],
            Box::new(move |ctx| vec![Some(vec![ctx.grad[0]; n])]),
        )
    }

    pub fn mean_all(&self) -> Result<Self> {
        let n = self.numel();
        if n == 0 {
            return Err(Error::Input("mean of empty tensor".into()));
        }
        self.sum_all()?.scale(T::one() / T::lit(n as f64))
    }

    /// Sums over `axis`, removing it from the shape.
    pub fn sum_axis(&self, axis: usize) -> Result<Self> {
        self.reduce_axis("sum_axis", axis, T::one())
    }

    /// Averages over `axis`, removing it from the shape.
    pub fn mean_axis(&self, axis: usize) -> Result<Self> {
        let len = *self
            .shape()
            .get(axis)
            .ok_or_else(|| Error::shape("mean_axis", self.shape(), &[axis]))?;
        if len == 0 {
            return Err(Error::Input("mean over empty axis".into()));
        }
        self.reduce_axis("mean_axis", axis, T::one() / T::lit(len as f64))
    }

    fn reduce_axis(&self, op: &'static str, axis: usize, weight: T) -> Result<Self> {
        if axis >= self.ndim() {
            return Err(Error::shape(op, self.shape(), &[axis]));
        }
        let (outer, len, inner) = split_axis(self.shape(), axis);
        let mut out = vec![T::zero(); outer * inner];
        {
            let x = self.data();
            for o in 0..outer {
                let dst = &mut out[o * inner..(o + 1) * inner];
                for k in 0..len {
                    let src = &x[(o * len + k) * inner..(o * len + k + 1) * inner];
                    dst.iter_mut().zip(src).for_each(|(d, &s)| *d += s);
                }
                dst.iter_mut().for_each(|d| *d *= weight);
            }
        }
        let mut shape = self.shape().to_vec();
        shape.remove(axis);
        Tensor::from_op(
            op,
            out,
            shape,
            vec![self.clone()],
            Box::new(move |ctx| {
                let mut g = vec![T::zero(); outer * len * inner];
                for o in 0..outer {
                    let src = &ctx.grad[o * inner..(o + 1) * inner];
                    for k in 0..len {
                        let dst = &mut g[(o * len + k) * inner..(o * len + k + 1) * inner];
                        dst.iter_mut().zip(src).for_each(|(d, &s)| *d = s * weight);
                    }
                }
                vec![Some(g)]
            }),
        )
    }
}

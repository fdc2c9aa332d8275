use super::{Float, Tensor};
use crate::error::{Error, Result};

/// `c[m×n] += a[m×k] · b[k×n]`
pub(crate) fn gemm_nn<T: Float>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    T::gemm_strided(m, k, n, a, (k as isize, 1), b, (n as isize, 1), c, n);
}

/// `c[m×n] += a[m×k] · b[n×k]ᵀ`
pub(crate) fn gemm_nt<T: Float>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    T::gemm_strided(m, k, n, a, (k as isize, 1), b, (1, k as isize), c, n);
}

/// `c[m×n] += a[k×m]ᵀ · b[k×n]`
pub(crate) fn gemm_tn<T: Float>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    T::gemm_strided(m, k, n, a, (1, m as isize), b, (n as isize, 1), c, n);
}

impl<T: Float> Tensor<T> {
    /// Matrix product. `self` may carry leading batch axes (`[..., k]`), which
    /// are flattened into rows; `other` must be `[k, n]`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        let (ash, bsh) = (self.shape(), other.shape());
        if ash.is_empty() || bsh.len() != 2 || ash[ash.len() - 1] != bsh[0] {
            return Err(Error::shape("matmul", ash, bsh));
        }
        let k = bsh[0];
        let n = bsh[1];
        let m = self.numel() / k.max(1);
        let mut out = vec![T::zero(); m * n];
        gemm_nn(&self.data(), &other.data(), &mut out, m, k, n);
        let mut shape = ash.to_vec();
        *shape.last_mut().unwrap() = n;
        Tensor::from_op(
            "matmul",
            out,
            shape,
            vec![self.clone(), other.clone()],
            Box::new(move |ctx| {
                let (a, b) = (&ctx.inputs[0], &ctx.inputs[1]);
                let ga = a.requires_grad().then(|| {
                    let mut g = vec![T::zero(); m * k];
                    gemm_nt(ctx.grad, &b.data(), &mut g, m, n, k);
                    g
                });
                let gb = b.requires_grad().then(|| {
                    let mut g = vec![T::zero(); k * n];
                    gemm_tn(&a.data(), ctx.grad, &mut g, k, m, n);
                    g
                });
                vec![ga, gb]
            }),
        )
    }

    /// Batched product `[b, m, k] · [b, k, n] → [b, m, n]`.
    pub fn bmm(&self, other: &Self) -> Result<Self> {
        let (ash, bsh) = (self.shape(), other.shape());
        if ash.len() != 3 || bsh.len() != 3 || ash[0] != bsh[0] || ash[2] != bsh[1] {
            return Err(Error::shape("bmm", ash, bsh));
        }
        let (batch, m, k, n) = (ash[0], ash[1], ash[2], bsh[2]);
        let mut out = vec![T::zero(); batch * m * n];
        {
            let (a, b) = (self.data(), other.data());
            for i in 0..batch {
                gemm_nn(
                    &a[i * m * k..(i + 1) * m * k],
                    &b[i * k * n..(i + 1) * k * n],
                    &mut out[i * m * n..(i + 1) * m * n],
                    m,
                    k,
                    n,
                );
            }
        }
        Tensor::from_op(
            "bmm",
            out,
            vec![batch, m, n],
            vec![self.clone(), other.clone()],
            Box::new(move |ctx| {
                let (a, b) = (&ctx.inputs[0], &ctx.inputs[1]);
                let ga = a.requires_grad().then(|| {
                    let bd = b.data();
                    let mut g = vec![T::zero(); batch * m * k];
                    for i in 0..batch {
                        gemm_nt(
                            &ctx.grad[i * m * n..(i + 1) * m * n],
                            &bd[i * k * n..(i + 1) * k * n],
                            &mut g[i * m * k..(i + 1) * m * k],
                            m,
                            n,
                            k,
                        );
                    }
                    g
                });
                let gb = b.requires_grad().then(|| {
                    let ad = a.data();
                    let mut g = vec![T::zero(); batch * k * n];
                    for i in 0..batch {
                        gemm_tn(
                            &ad[i * m * k..(i + 1) * m * k],
                            &ctx.grad[i * m * n..(i + 1) * m * n],
                            &mut g[i * k * n..(i + 1) * k * n],
                            k,
                            m,
                            n,
                        );
                    }
                    g
                });
                vec![ga, gb]
            }),
        )
    }
}

use super::{same_shape, Float, Tensor};
use crate::error::{Error, Result};

impl<T: Float> Tensor<T> {
    fn unary(
        &self,
        op: &'static str,
        f: impl Fn(T) -> T,
        df: impl Fn(T, T) -> T + Send + Sync + 'static,
    ) -> Result<Self> {
        let data: Vec<T> = self.data().iter().map(|&x| f(x)).collect();
        Tensor::from_op(
            op,
            data,
            self.shape().to_vec(),
            vec![self.clone()],
            // df(x, y) is dy/dx given input x and output y
            Box::new(move |ctx| {
                let x = ctx.inputs[0].data();
                let g = ctx
                    .grad
                    .iter()
                    .zip(x.iter().zip(ctx.out))
                    .map(|(&g, (&x, &y))| g * df(x, y))
                    .collect();
                vec![Some(g)]
            }),
        )
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_shape("add", self.shape(), other.shape())?;
        let data = {
            let (a, b) = (self.data(), other.data());
            a.iter().zip(b.iter()).map(|(&x, &y)| x + y).collect()
        };
        Tensor::from_op(
            "add",
            data,
            self.shape().to_vec(),
            vec![self.clone(), other.clone()],
            Box::new(|ctx| vec![Some(ctx.grad.to_vec()), Some(ctx.grad.to_vec())]),
        )
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        same_shape("sub", self.shape(), other.shape())?;
        let data = {
            let (a, b) = (self.data(), other.data());
            a.iter().zip(b.iter()).map(|(&x, &y)| x - y).collect()
        };
        Tensor::from_op(
            "sub",
            data,
            self.shape().to_vec(),
            vec![self.clone(), other.clone()],
            Box::new(|ctx| {
                vec![
                    Some(ctx.grad.to_vec()),
                    Some(ctx.grad.iter().map(|&g| -g).collect()),
                ]
            }),
        )
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        same_shape("mul", self.shape(), other.shape())?;
        let data = {
            let (a, b) = (self.data(), other.data());
            a.iter().zip(b.iter()).map(|(&x, &y)| x * y).collect()
        };
        Tensor::from_op(
            "mul",
            data,
            self.shape().to_vec(),
            vec![self.clone(), other.clone()],
            Box::new(|ctx| {
                let (a, b) = (ctx.inputs[0].data(), ctx.inputs[1].data());
                let ga = ctx.inputs[0]
                    .requires_grad()
                    .then(|| ctx.grad.iter().zip(b.iter()).map(|(&g, &y)| g * y).collect());
                let gb = ctx.inputs[1]
                    .requires_grad()
                    .then(|| ctx.grad.iter().zip(a.iter()).map(|(&g, &x)| g * x).collect());
                vec![ga, gb]
            }),
        )
    }

    /// Adds a `[n]` vector to every length-`n` row along the last axis.
    pub fn add_bias(&self, bias: &Self) -> Result<Self> {
        let n = *self.shape().last().unwrap_or(&0);
        if bias.shape() != [n] {
            return Err(Error::shape("add_bias", self.shape(), bias.shape()));
        }
        let data = {
            let (a, b) = (self.data(), bias.data());
            let mut out = a.clone();
            for row in out.chunks_mut(n.max(1)) {
                row.iter_mut().zip(b.iter()).for_each(|(x, &c)| *x += c);
            }
            out
        };
        Tensor::from_op(
            "add_bias",
            data,
            self.shape().to_vec(),
            vec![self.clone(), bias.clone()],
            Box::new(move |ctx| {
                let gb = ctx.inputs[1].requires_grad().then(|| {
                    let mut acc = vec![T::zero(); n];
                    for row in ctx.grad.chunks(n.max(1)) {
                        acc.iter_mut().zip(row).for_each(|(a, &g)| *a += g);
                    }
                    acc
                });
                vec![Some(ctx.grad.to_vec()), gb]
            }),
        )
    }

    /// Multiplies every element by a constant.
    pub fn scale(&self, c: T) -> Result<Self> {
        let data = self.data().iter().map(|&x| x * c).collect();
        Tensor::from_op(
            "scale",
            data,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(move |ctx| vec![Some(ctx.grad.iter().map(|&g| g * c).collect())]),
        )
    }

    /// Multiplies every element by a one-element tensor.
    pub fn mul_scalar(&self, s: &Self) -> Result<Self> {
        if s.numel() != 1 {
            return Err(Error::shape("mul_scalar", self.shape(), s.shape()));
        }
        let c = s.data()[0];
        let data = self.data().iter().map(|&x| x * c).collect();
        Tensor::from_op(
            "mul_scalar",
            data,
            self.shape().to_vec(),
            vec![self.clone(), s.clone()],
            Box::new(|ctx| {
                let c = ctx.inputs[1].data()[0];
                let gx = ctx.grad.iter().map(|&g| g * c).collect();
                let gs = ctx.inputs[1].requires_grad().then(|| {
                    let x = ctx.inputs[0].data();
                    vec![ctx.grad.iter().zip(x.iter()).map(|(&g, &x)| g * x).sum()]
                });
                vec![Some(gx), gs]
            }),
        )
    }

    pub fn neg(&self) -> Result<Self> {
        self.scale(-T::one())
    }

    pub fn exp(&self) -> Result<Self> {
        self.unary("exp", |x| x.exp(), |_, y| y)
    }

    /// Clamps into `[lo, hi]`; the gradient is zero where clamping is active.
    pub fn clamp(&self, lo: T, hi: T) -> Result<Self> {
        self.unary(
            "clamp",
            move |x| x.max(lo).min(hi),
            move |x, _| {
                if x < lo || x > hi {
                    T::zero()
                } else {
                    T::one()
                }
            },
        )
    }

    pub fn relu(&self) -> Result<Self> {
        self.unary(
            "relu",
            |x| x.max(T::zero()),
            |x, _| if x > T::zero() { T::one() } else { T::zero() },
        )
    }

    pub fn sigmoid(&self) -> Result<Self> {
        self.unary("sigmoid", sigmoid, |_, y| y * (T::one() - y))
    }
}

pub(crate) fn sigmoid<T: Float>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

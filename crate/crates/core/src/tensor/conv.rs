use super::{Float, Tensor};
use crate::error::{Error, Result};

/// Visits every valid (output row, input row, x-range, shift) for one 3×3 tap
/// under zero "same" padding. `f(out_row, in_row, x0, x1, dx)` covers output
/// columns `x0..x1`, which read input columns shifted by `dx`.
#[inline]
fn for_tap(h: usize, w: usize, ky: usize, kx: usize, mut f: impl FnMut(usize, usize, usize, usize, isize)) {
    let dy = ky as isize - 1;
    let dx = kx as isize - 1;
    let x0 = if dx < 0 { 1 } else { 0 };
    let x1 = if dx > 0 { w.saturating_sub(1) } else { w };
    if x0 >= x1 {
        return;
    }
    for y in 0..h {
        let sy = y as isize + dy;
        if sy < 0 || sy >= h as isize {
            continue;
        }
        f(y, sy as usize, x0, x1, dx);
    }
}

impl<T: Float> Tensor<T> {
    /// 3×3 convolution, stride 1, zero "same" padding, NCHW layout.
    ///
    /// `weight` is `[c_out, c_in, 3, 3]`, `bias` is `[c_out]`.
    pub fn conv2d_3x3(&self, weight: &Self, bias: &Self) -> Result<Self> {
        let (n, ci, h, w) = match self.shape() {
            &[n, c, h, w] => (n, c, h, w),
            s => return Err(Error::shape("conv2d_3x3", s, weight.shape())),
        };
        let co = match weight.shape() {
            &[o, i, 3, 3] if i == ci => o,
            s => return Err(Error::shape("conv2d_3x3", self.shape(), s)),
        };
        if bias.shape() != [co] {
            return Err(Error::shape("conv2d_3x3", weight.shape(), bias.shape()));
        }
        let plane = h * w;
        let mut out = vec![T::zero(); n * co * plane];
        {
            let (x, wt, b) = (self.data(), weight.data(), bias.data());
            for s in 0..n {
                for o in 0..co {
                    let dst = &mut out[(s * co + o) * plane..(s * co + o + 1) * plane];
                    dst.iter_mut().for_each(|v| *v = b[o]);
                    for i in 0..ci {
                        let src = &x[(s * ci + i) * plane..(s * ci + i + 1) * plane];
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let wv = wt[((o * ci + i) * 3 + ky) * 3 + kx];
                                for_tap(h, w, ky, kx, |y, sy, x0, x1, dx| {
                                    let d = &mut dst[y * w + x0..y * w + x1];
                                    let sx0 = (x0 as isize + dx) as usize;
                                    let sr = &src[sy * w + sx0..sy * w + sx0 + (x1 - x0)];
                                    d.iter_mut().zip(sr).for_each(|(d, &v)| *d += wv * v);
                                });
                            }
                        }
                    }
                }
            }
        }
        Tensor::from_op(
            "conv2d_3x3",
            out,
            vec![n, co, h, w],
            vec![self.clone(), weight.clone(), bias.clone()],
            Box::new(move |ctx| {
                let (xin, wtt, bt) = (&ctx.inputs[0], &ctx.inputs[1], &ctx.inputs[2]);
                let x = xin.data();
                let wt = wtt.data();
                let gy = ctx.grad;
                let gx = xin.requires_grad().then(|| {
                    let mut gx = vec![T::zero(); n * ci * plane];
                    for s in 0..n {
                        for o in 0..co {
                            let g = &gy[(s * co + o) * plane..(s * co + o + 1) * plane];
                            for i in 0..ci {
                                let dst = &mut gx[(s * ci + i) * plane..(s * ci + i + 1) * plane];
                                for ky in 0..3 {
                                    for kx in 0..3 {
                                        let wv = wt[((o * ci + i) * 3 + ky) * 3 + kx];
                                        for_tap(h, w, ky, kx, |y, sy, x0, x1, dx| {
                                            let sx0 = (x0 as isize + dx) as usize;
                                            let d = &mut dst[sy * w + sx0..sy * w + sx0 + (x1 - x0)];
                                            let gr = &g[y * w + x0..y * w + x1];
                                            d.iter_mut().zip(gr).for_each(|(d, &v)| *d += wv * v);
                                        });
                                    }
                                }
                            }
                        }
                    }
                    gx
                });
                let gw = wtt.requires_grad().then(|| {
                    let mut gw = vec![T::zero(); co * ci * 9];
                    for s in 0..n {
                        for o in 0..co {
                            let g = &gy[(s * co + o) * plane..(s * co + o + 1) * plane];
                            for i in 0..ci {
                                let src = &x[(s * ci + i) * plane..(s * ci + i + 1) * plane];
                                for ky in 0..3 {
                                    for kx in 0..3 {
                                        let mut acc = T::zero();
                                        for_tap(h, w, ky, kx, |y, sy, x0, x1, dx| {
                                            let sx0 = (x0 as isize + dx) as usize;
                                            let sr = &src[sy * w + sx0..sy * w + sx0 + (x1 - x0)];
                                            let gr = &g[y * w + x0..y * w + x1];
                                            let mut part = T::zero();
                                            for (&a, &b) in gr.iter().zip(sr) {
                                                part += a * b;
                                            }
                                            acc += part;
                                        });
                                        gw[((o * ci + i) * 3 + ky) * 3 + kx] += acc;
                                    }
                                }
                            }
                        }
                    }
                    gw
                });
                let gb = bt.requires_grad().then(|| {
                    let mut gb = vec![T::zero(); co];
                    for s in 0..n {
                        for (o, acc) in gb.iter_mut().enumerate() {
                            *acc += gy[(s * co + o) * plane..(s * co + o + 1) * plane]
                                .iter()
                                .copied()
                                .sum::<T>();
                        }
                    }
                    gb
                });
                vec![gx, gw, gb]
            }),
        )
    }

    /// 2×2 max-pool with stride 2 over the last two axes. Odd extents keep
    /// their trailing row/column as a partial window (ceil mode), so outputs
    /// are `ceil(h/2) × ceil(w/2)`.
    pub fn max_pool2x2(&self) -> Result<Self> {
        let nd = self.ndim();
        if nd < 2 {
            return Err(Error::shape("max_pool2x2", self.shape(), &[2, 2]));
        }
        let (h, w) = (self.shape()[nd - 2], self.shape()[nd - 1]);
        let planes = self.numel() / (h * w).max(1);
        let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
        let mut out = Vec::with_capacity(planes * oh * ow);
        let mut argmax = Vec::with_capacity(planes * oh * ow);
        {
            let x = self.data();
            for p in 0..planes {
                let base = p * h * w;
                for y in 0..oh {
                    for xo in 0..ow {
                        let mut best = base + 2 * y * w + 2 * xo;
                        for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                            let (yy, xx) = (2 * y + dy, 2 * xo + dx);
                            if yy < h && xx < w && x[base + yy * w + xx] > x[best] {
                                best = base + yy * w + xx;
                            }
                        }
                        out.push(x[best]);
                        argmax.push(best);
                    }
                }
            }
        }
        let mut shape = self.shape().to_vec();
        shape[nd - 2] = oh;
        shape[nd - 1] = ow;
        let numel = self.numel();
        Tensor::from_op(
            "max_pool2x2",
            out,
            shape,
            vec![self.clone()],
            Box::new(move |ctx| {
                let mut g = vec![T::zero(); numel];
                for (&src, &gv) in argmax.iter().zip(ctx.grad) {
                    g[src] += gv;
                }
                vec![Some(g)]
            }),
        )
    }
}

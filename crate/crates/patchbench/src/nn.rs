//! Minimal neural-network plumbing with hand-written backward passes.
//!
//! Small fully-deterministic f64 layers over `ndarray`, enough for the grid
//! detector and the color-parameter regressor: 2D convolution (im2col +
//! GEMM), 2x2 max pooling, fully connected layers, leaky ReLU, dropout and
//! Adam. Single-threaded on purpose: identical seeds give bit-identical
//! training runs.

use ndarray::{linalg::general_mat_mul, Array1, Array2, Array3, Array4, Dimension};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A trainable array with gradient and Adam state.
#[derive(Debug, Clone)]
pub struct Param<D: Dimension> {
    pub v: ndarray::Array<f64, D>,
    pub g: ndarray::Array<f64, D>,
    m: ndarray::Array<f64, D>,
    s: ndarray::Array<f64, D>,
}

impl<D: Dimension> Param<D> {
    pub fn new(v: ndarray::Array<f64, D>) -> Self {
        let g = ndarray::Array::zeros(v.raw_dim());
        let m = ndarray::Array::zeros(v.raw_dim());
        let s = ndarray::Array::zeros(v.raw_dim());
        Self { v, g, m, s }
    }

    pub fn zero_grad(&mut self) {
        self.g.fill(0.0);
    }

    /// One Adam update using the accumulated gradient; `t` is 1-based.
    pub fn adam_step(&mut self, lr: f64, beta1: f64, beta2: f64, eps: f64, t: u64) {
        let bc1 = 1.0 - beta1.powi(t as i32);
        let bc2 = 1.0 - beta2.powi(t as i32);
        ndarray::Zip::from(&mut self.v)
            .and(&mut self.m)
            .and(&mut self.s)
            .and(&self.g)
            .for_each(|v, m, s, &g| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *s = beta2 * *s + (1.0 - beta2) * g * g;
                let mh = *m / bc1;
                let sh = *s / bc2;
                *v -= lr * mh / (sh.sqrt() + eps);
            });
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

/// He-uniform initialization in `[-sqrt(6/fan_in), sqrt(6/fan_in)]`.
pub fn he_uniform<D: Dimension>(shape: D, fan_in: usize, rng: &mut ChaCha8Rng) -> ndarray::Array<f64, D> {
    let limit = (6.0 / fan_in as f64).sqrt();
    ndarray::Array::from_shape_simple_fn(shape, || rng.random_range(-limit..limit))
}

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// Derivative of leaky ReLU recovered from the output sign (valid because
/// the slope is positive).
pub fn leaky_relu_grad_from_y(y: f64, slope: f64) -> f64 {
    if y > 0.0 {
        1.0
    } else {
        slope
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        (1.0 + x.exp()).ln()
    }
}

/// Binary cross-entropy from the logit, numerically stable:
/// `max(x, 0) - x*target + ln(1 + exp(-|x|))`.
pub fn bce_with_logit(logit: f64, target: f64) -> f64 {
    logit.max(0.0) - logit * target + (1.0 + (-logit.abs()).exp()).ln()
}

/// d(BCE)/d(logit) = sigmoid(logit) - target.
pub fn bce_with_logit_grad(logit: f64, target: f64) -> f64 {
    sigmoid(logit) - target
}

// ---------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------

/// 2D convolution over CHW tensors with zero padding.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub w: Param<ndarray::Ix4>,
    pub b: Param<ndarray::Ix1>,
    pub stride: usize,
    pub pad: usize,
}

/// Cached activations needed by [`Conv2d::backward`].
pub struct ConvCtx {
    cols: Array2<f64>,
    in_dim: (usize, usize, usize),
    out_hw: (usize, usize),
}

impl Conv2d {
    pub fn new(in_c: usize, out_c: usize, k: usize, stride: usize, pad: usize, rng: &mut ChaCha8Rng) -> Self {
        let fan_in = in_c * k * k;
        Self {
            w: Param::new(he_uniform(ndarray::Ix4(out_c, in_c, k, k), fan_in, rng)),
            b: Param::new(Array1::zeros(out_c)),
            stride,
            pad,
        }
    }

    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        let k = self.w.v.dim().2;
        (
            (h + 2 * self.pad - k) / self.stride + 1,
            (w + 2 * self.pad - k) / self.stride + 1,
        )
    }

    fn im2col(&self, x: &Array3<f64>) -> (Array2<f64>, (usize, usize)) {
        let (in_c, h, w) = x.dim();
        let k = self.w.v.dim().2;
        let (oh, ow) = self.out_hw(h, w);
        let mut cols = Array2::zeros((in_c * k * k, oh * ow));
        for c in 0..in_c {
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    for oy in 0..oh {
                        let sy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        for ox in 0..ow {
                            let sx = (ox * self.stride + kx) as isize - self.pad as isize;
                            if sx < 0 || sx >= w as isize {
                                continue;
                            }
                            cols[[row, oy * ow + ox]] = x[[c, sy as usize, sx as usize]];
                        }
                    }
                }
            }
        }
        (cols, (oh, ow))
    }

    pub fn forward(&self, x: &Array3<f64>) -> (Array3<f64>, ConvCtx) {
        let (in_c, h, w) = x.dim();
        let (out_c, _, k, _) = self.w.v.dim();
        let (cols, (oh, ow)) = self.im2col(x);
        let wmat = self
            .w
            .v
            .view()
            .into_shape_with_order((out_c, in_c * k * k))
            .expect("contiguous conv weights");
        let mut out_mat = Array2::zeros((out_c, oh * ow));
        general_mat_mul(1.0, &wmat, &cols, 0.0, &mut out_mat);
        for (mut row, &b) in out_mat.outer_iter_mut().zip(self.b.v.iter()) {
            row += b;
        }
        let y = out_mat.into_shape_with_order((out_c, oh, ow)).unwrap();
        (y, ConvCtx { cols, in_dim: (in_c, h, w), out_hw: (oh, ow) })
    }

    /// Accumulates weight/bias gradients and returns the input gradient.
    pub fn backward(&mut self, ctx: &ConvCtx, dy: &Array3<f64>) -> Array3<f64> {
        let (out_c, in_c, k, _) = self.w.v.dim();
        let (oh, ow) = ctx.out_hw;
        let dy_mat = dy.view().into_shape_with_order((out_c, oh * ow)).expect("contiguous dy");
        // dW += dY . cols^T
        {
            let mut dw = self
                .w
                .g
                .view_mut()
                .into_shape_with_order((out_c, in_c * k * k))
                .expect("contiguous conv grads");
            general_mat_mul(1.0, &dy_mat, &ctx.cols.t(), 1.0, &mut dw);
        }
        for (gb, row) in self.b.g.iter_mut().zip(dy_mat.outer_iter()) {
            *gb += row.sum();
        }
        // dcols = W^T . dY, then scatter back (col2im).
        let wmat = self
            .w
            .v
            .view()
            .into_shape_with_order((out_c, in_c * k * k))
            .unwrap();
        let mut dcols = Array2::zeros((in_c * k * k, oh * ow));
        general_mat_mul(1.0, &wmat.t(), &dy_mat, 0.0, &mut dcols);
        let (_, h, w) = ctx.in_dim;
        let mut dx = Array3::zeros(ctx.in_dim);
        for c in 0..in_c {
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    for oy in 0..oh {
                        let sy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        for ox in 0..ow {
                            let sx = (ox * self.stride + kx) as isize - self.pad as isize;
                            if sx < 0 || sx >= w as isize {
                                continue;
                            }
                            dx[[c, sy as usize, sx as usize]] += dcols[[row, oy * ow + ox]];
                        }
                    }
                }
            }
        }
        dx
    }
}

// ---------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------

/// 2x2 max pooling with stride 2 (inputs must have even height/width).
pub struct MaxPool2;

pub struct PoolCtx {
    argmax: Vec<u32>,
    in_dim: (usize, usize, usize),
}

impl MaxPool2 {
    pub fn forward(x: &Array3<f64>) -> (Array3<f64>, PoolCtx) {
        let (c, h, w) = x.dim();
        let (oh, ow) = (h / 2, w / 2);
        let mut y = Array3::zeros((c, oh, ow));
        let mut argmax = vec![0u32; c * oh * ow];
        for ci in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0u32;
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let (sy, sx) = (oy * 2 + dy, ox * 2 + dx);
                            let v = x[[ci, sy, sx]];
                            if v > best {
                                best = v;
                                best_idx = (sy * w + sx) as u32;
                            }
                        }
                    }
                    y[[ci, oy, ox]] = best;
                    argmax[(ci * oh + oy) * ow + ox] = best_idx;
                }
            }
        }
        (y, PoolCtx { argmax, in_dim: (c, h, w) })
    }

    pub fn backward(ctx: &PoolCtx, dy: &Array3<f64>) -> Array3<f64> {
        let (c, h, w) = ctx.in_dim;
        let (_, oh, ow) = dy.dim();
        let mut dx = Array3::zeros((c, h, w));
        for ci in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let flat = ctx.argmax[(ci * oh + oy) * ow + ox] as usize;
                    dx[[ci, flat / w, flat % w]] += dy[[ci, oy, ox]];
                }
            }
        }
        dx
    }
}

// ---------------------------------------------------------------------
// Fully connected
// ---------------------------------------------------------------------

pub struct Linear {
    pub w: Param<ndarray::Ix2>,
    pub b: Param<ndarray::Ix1>,
}

pub struct LinearCtx {
    x: Array1<f64>,
}

impl Linear {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            w: Param::new(he_uniform(ndarray::Ix2(out_dim, in_dim), in_dim, rng)),
            b: Param::new(Array1::zeros(out_dim)),
        }
    }

    pub fn forward(&self, x: &Array1<f64>) -> (Array1<f64>, LinearCtx) {
        let y = self.w.v.dot(x) + &self.b.v;
        (y, LinearCtx { x: x.clone() })
    }

    pub fn backward(&mut self, ctx: &LinearCtx, dy: &Array1<f64>) -> Array1<f64> {
        let (out_dim, in_dim) = self.w.v.dim();
        let dy2 = dy.view().into_shape_with_order((out_dim, 1)).unwrap();
        let x2 = ctx.x.view().into_shape_with_order((1, in_dim)).unwrap();
        {
            let mut gw = self.w.g.view_mut();
            general_mat_mul(1.0, &dy2, &x2, 1.0, &mut gw);
        }
        self.b.g += dy;
        self.w.v.t().dot(dy)
    }
}

/// Inverted dropout mask: zeros activations with probability `p` and
/// rescales survivors by `1/(1-p)`.
pub fn dropout_mask(len: usize, p: f64, rng: &mut ChaCha8Rng) -> Array1<f64> {
    let keep = 1.0 - p;
    Array1::from_shape_simple_fn(len, || if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
}

//! Minimal neural-network plumbing for the toy pipeline: convolutions with
//! hand-written backward passes, dense layers, activations and Adam.
//!
//! Everything is f32 with f64 accumulation inside reductions. Forward and
//! backward passes are single-writer per output element, so results are
//! deterministic.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::Tensor3;

/// A learnable tensor with its gradient and Adam state.
#[derive(Debug, Clone)]
pub struct Param {
    pub data: Vec<f32>,
    pub grad: Vec<f32>,
    m: Vec<f32>,
    v: Vec<f32>,
    pub shape: Vec<usize>,
}

impl Param {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Param {
            data: vec![0.0; n],
            grad: vec![0.0; n],
            m: vec![0.0; n],
            v: vec![0.0; n],
            shape: shape.to_vec(),
        }
    }

    /// Kaiming-style init: normal with std sqrt(2 / fan_in).
    pub fn kaiming(rng: &mut impl Rng, shape: &[usize], fan_in: usize) -> Self {
        let mut p = Param::zeros(shape);
        let std = (2.0 / fan_in.max(1) as f64).sqrt();
        for w in &mut p.data {
            // Box-Muller from two uniforms keeps us off distribution crates.
            let u1: f64 = rng.random_range(1e-9..1.0);
            let u2: f64 = rng.random_range(0.0..1.0);
            let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            *w = (z * std) as f32;
        }
        p
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Adam with bias correction; one shared step counter.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
        }
    }

    /// Apply one update to every parameter and clear the gradients.
    pub fn step<'a>(&mut self, params: impl Iterator<Item = &'a mut Param>) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for p in params {
            for i in 0..p.data.len() {
                let g = p.grad[i] as f64;
                let m = self.beta1 * p.m[i] as f64 + (1.0 - self.beta1) * g;
                let v = self.beta2 * p.v[i] as f64 + (1.0 - self.beta2) * g * g;
                p.m[i] = m as f32;
                p.v[i] = v as f32;
                let update = self.lr * (m / bc1) / ((v / bc2).sqrt() + self.eps);
                p.data[i] -= update as f32;
            }
            p.zero_grad();
        }
    }
}

///2-D convolution, kernel layout `[out_c][in_c][k][k]`, same padding
/// (`k / 2` on each side), square odd kernel.
pub fn conv2d_forward(
    x: &Tensor3,
    w: &[f32],
    b: &[f32],
    out_c: usize,
    k: usize,
    stride: usize,
) -> Result<Tensor3> {
    let (in_c, h, wd) = x.shape();
    if w.len() != out_c * in_c * k * k || b.len() != out_c {
        return Err(Error::shape(
            format!("kernel {out_c}x{in_c}x{k}x{k} + bias {out_c}"),
            format!("{} weights + {} biases", w.len(), b.len()),
        ));
    }
    let pad = (k / 2) as isize;
    let oh = (h + stride - 1) / stride;
    let ow = (wd + stride - 1) / stride;
    let mut out = Tensor3::zeros(out_c, oh, ow);
    for oc in 0..out_c {
        let dst = out.channel_mut(oc);
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = b[oc] as f64;
                for ic in 0..in_c {
                    let src = x.channel(ic);
                    let wbase = ((oc * in_c) + ic) * k * k;
                    for ky in 0..k {
                        let iy = (oy * stride) as isize + ky as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let ix = (ox * stride) as isize + kx as isize - pad;
                            if ix < 0 || ix >= wd as isize {
                                continue;
                            }
                            acc += src[iy as usize * wd + ix as usize] as f64
                                * w[wbase + ky * k + kx] as f64;
                        }
                    }
                }
                dst[oy * ow + ox] = acc as f32;
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv2d_forward`]: input gradient plus kernel/bias gradients
/// (accumulated in f64, returned as f32 to add into a `Param`).
pub fn conv2d_backward(
    x: &Tensor3,
    w: &[f32],
    grad_out: &Tensor3,
    out_c: usize,
    k: usize,
    stride: usize,
) -> Result<(Tensor3, Vec<f32>, Vec<f32>)> {
    let (in_c, h, wd) = x.shape();
    let (goc, oh, ow) = grad_out.shape();
    if goc != out_c {
        return Err(Error::shape(format!("{out_c} channels"), format!("{goc}")));
    }
    let pad = (k / 2) as isize;
    let mut gx = vec![0.0f64; in_c * h * wd];
    let mut gw = vec![0.0f64; out_c * in_c * k * k];
    let mut gb = vec![0.0f64; out_c];
    for oc in 0..out_c {
        let g = grad_out.channel(oc);
        for oy in 0..oh {
            for ox in 0..ow {
                let go = g[oy * ow + ox] as f64;
                if go == 0.0 {
                    continue;
                }
                gb[oc] += go;
                for ic in 0..in_c {
                    let src = x.channel(ic);
                    let wbase = ((oc * in_c) + ic) * k * k;
                    let xbase = ic * h * wd;
                    for ky in 0..k {
                        let iy = (oy * stride) as isize + ky as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let ix = (ox * stride) as isize + kx as isize - pad;
                            if ix < 0 || ix >= wd as isize {
                                continue;
                            }
                            let xi = iy as usize * wd + ix as usize;
                            gw[wbase + ky * k + kx] += go * src[xi] as f64;
                            gx[xbase + xi] += go * w[wbase + ky * k + kx] as f64;
                        }
                    }
                }
            }
        }
    }
    let gx = Tensor3::from_vec(in_c, h, wd, gx.into_iter().map(|v| v as f32).collect())?;
    Ok((
        gx,
        gw.into_iter().map(|v| v as f32).collect(),
        gb.into_iter().map(|v| v as f32).collect(),
    ))
}

/// A convolution layer owning its parameters.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub w: Param,
    pub b: Param,
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
}

impl Conv2d {
    pub fn new(rng: &mut impl Rng, in_c: usize, out_c: usize, k: usize, stride: usize) -> Self {
        Conv2d {
            w: Param::kaiming(rng, &[out_c, in_c, k, k], in_c * k * k),
            b: Param::zeros(&[out_c]),
            in_c,
            out_c,
            k,
            stride,
        }
    }

    pub fn forward(&self, x: &Tensor3) -> Result<Tensor3> {
        conv2d_forward(x, &self.w.data, &self.b.data, self.out_c, self.k, self.stride)
    }

    /// Accumulates weight gradients and returns the input gradient.
    pub fn backward(&mut self, x: &Tensor3, grad_out: &Tensor3) -> Result<Tensor3> {
        let (gx, gw, gb) =
            conv2d_backward(x, &self.w.data, grad_out, self.out_c, self.k, self.stride)?;
        for (a, g) in self.w.grad.iter_mut().zip(&gw) {
            *a += g;
        }
        for (a, g) in self.b.grad.iter_mut().zip(&gb) {
            *a += g;
        }
        Ok(gx)
    }
}

/// Dense layer, weight layout `[out][in]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: Param,
    pub b: Param,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(rng: &mut impl Rng, in_dim: usize, out_dim: usize) -> Self {
        Linear {
            w: Param::kaiming(rng, &[out_dim, in_dim], in_dim),
            b: Param::zeros(&[out_dim]),
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, x: &[f32]) -> Result<Vec<f32>> {
        if x.len() != self.in_dim {
            return Err(Error::shape(
                format!("{} inputs", self.in_dim),
                format!("{}", x.len()),
            ));
        }
        let mut out = Vec::with_capacity(self.out_dim);
        for o in 0..self.out_dim {
            let row = &self.w.data[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.b.data[o] as f64;
            for (wi, xi) in row.iter().zip(x) {
                acc += *wi as f64 * *xi as f64;
            }
            out.push(acc as f32);
        }
        Ok(out)
    }

    /// Accumulates weight gradients and returns the input gradient.
    pub fn backward(&mut self, x: &[f32], grad_out: &[f32]) -> Vec<f32> {
        let mut gx = vec![0.0f64; self.in_dim];
        for o in 0..self.out_dim {
            let go = grad_out[o] as f64;
            self.b.grad[o] += go as f32;
            let row = &self.w.data[o * self.in_dim..(o + 1) * self.in_dim];
            let grow = &mut self.w.grad[o * self.in_dim..(o + 1) * self.in_dim];
            for i in 0..self.in_dim {
                grow[i] += (go * x[i] as f64) as f32;
                gx[i] += go * row[i] as f64;
            }
        }
        gx.into_iter().map(|v| v as f32).collect()
    }
}

pub fn relu(x: &Tensor3) -> Tensor3 {
    let mut out = x.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// Masks the upstream gradient by the sign of the forward input.
pub fn relu_backward(x: &Tensor3, grad_out: &Tensor3) -> Tensor3 {
    let mut g = grad_out.clone();
    for (gv, &xv) in g.data_mut().iter_mut().zip(x.data()) {
        if xv <= 0.0 {
            *gv = 0.0;
        }
    }
    g
}

#[inline]
pub fn sigmoid(x: f32) -> f32 {
    (1.0 / (1.0 + (-(x as f64)).exp())) as f32
}

/// d sigmoid(x) / dx expressed through the output value.
#[inline]
pub fn sigmoid_grad_from_output(s: f32) -> f32 {
    s * (1.0 - s)
}

/// Mean over each channel plane; used by the fixed-slot baseline head.
pub fn global_avg_pool(x: &Tensor3) -> Vec<f32> {
    let n = x.plane_len() as f64;
    (0..x.channels())
        .map(|c| (x.channel(c).iter().map(|&v| v as f64).sum::<f64>() / n) as f32)
        .collect()
}

/// Spread a pooled gradient uniformly back over each channel plane.
pub fn global_avg_pool_backward(grad: &[f32], shape: (usize, usize, usize)) -> Tensor3 {
    let (c, h, w) = shape;
    let n = (h * w) as f32;
    let mut out = Tensor3::zeros(c, h, w);
    for ch in 0..c {
        let g = grad[ch] / n;
        out.channel_mut(ch).fill(g);
    }
    out
}

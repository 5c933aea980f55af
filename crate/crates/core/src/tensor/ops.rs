//! Forward and backward kernels for the op set the networks need:
//! convolution, affine layers, activations, average pooling, and the two
//! losses. The same kernels serve graph-traced training and plain
//! inference, so both paths produce identical bits.
//!
//! Reduction order inside every sum is fixed (channel-major, then kernel
//! row, then kernel column), and parallelism never splits a single output
//! element across tasks, so results are reproducible for any thread count.

use super::{Scalar, Shape, Tensor};
use crate::error::{Error, Result};
use rayon::prelude::*;

/// Clamp bound keeping binary cross entropy away from log(0).
pub const BCE_EPS: f64 = 1e-7;

/// Convolution layer parameters: 4-D weights `(out_c, in_c, k, k)` plus a
/// per-output-channel bias.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams<T> {
    pub weights: Tensor<T>,
    pub bias: Vec<T>,
    pub stride: usize,
    pub padding: usize,
}

impl<T: Scalar> ConvParams<T> {
    pub fn out_channels(&self) -> usize {
        self.weights.shape().n
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape().c
    }

    pub fn kernel(&self) -> usize {
        self.weights.shape().h
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.weights.shape();
        if s.h != s.w || s.h == 0 {
            return Err(Error::Dimension(format!("kernel must be square and nonzero, got {s}")));
        }
        if self.bias.len() != s.n {
            return Err(Error::Dimension(format!(
                "bias length {} does not match {} output channels",
                self.bias.len(),
                s.n
            )));
        }
        if self.stride == 0 {
            return Err(Error::Dimension("stride must be positive".into()));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.weights.numel() + self.bias.len()
    }
}

/// Affine layer parameters: `m x n` weights (row-major) and `m` biases.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearParams<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub outputs: usize,
    pub inputs: usize,
}

impl<T: Scalar> LinearParams<T> {
    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.outputs * self.inputs || self.bias.len() != self.outputs {
            return Err(Error::Dimension(format!(
                "linear parameter sizes disagree: {}x{} weights has {} values, bias {}",
                self.outputs,
                self.inputs,
                self.weights.len(),
                self.bias.len()
            )));
        }
        Ok(())
    }
}

/// Elementwise nonlinearity selector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ActKind<T> {
    Relu,
    LeakyRelu(T),
    Tanh,
    Sigmoid,
}

/// Output spatial extent of a convolution; the extent must divide evenly.
pub fn conv_out_dim(in_dim: usize, k: usize, stride: usize, padding: usize) -> Result<usize> {
    let span = in_dim + 2 * padding;
    if span < k {
        return Err(Error::Dimension(format!(
            "input extent {in_dim} with padding {padding} is smaller than kernel {k}"
        )));
    }
    if (span - k) % stride != 0 {
        return Err(Error::Dimension(format!(
            "extent {in_dim} (pad {padding}, kernel {k}) is not reachable with stride {stride}"
        )));
    }
    Ok((span - k) / stride + 1)
}

/// Valid output index range for one kernel offset, i.e. all `o` with
/// `0 <= o*stride + k_off - padding < in_dim`.
#[inline]
fn valid_range(out_dim: usize, in_dim: usize, k_off: usize, stride: usize, padding: usize) -> (usize, usize) {
    let lo = if padding > k_off { (padding - k_off).div_ceil(stride) } else { 0 };
    let hi_excl = (in_dim + padding - k_off + stride - 1) / stride;
    (lo.min(out_dim), hi_excl.min(out_dim))
}

/// 2-D convolution with zero padding and bias.
pub fn conv2d<T: Scalar>(input: &Tensor<T>, params: &ConvParams<T>) -> Result<Tensor<T>> {
    params.validate()?;
    conv2d_raw(input, &params.weights, &params.bias, params.stride, params.padding)
}

pub fn conv2d_raw<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &[T],
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let is = input.shape();
    let ws = weights.shape();
    let (oc, ic, k) = (ws.n, ws.c, ws.h);
    if is.c != ic {
        return Err(Error::Dimension(format!(
            "input has {} channels but kernel expects {}",
            is.c, ic
        )));
    }
    let oh = conv_out_dim(is.h, k, stride, padding)?;
    let ow = conv_out_dim(is.w, k, stride, padding)?;

    if stride == 1 {
        if let Some(out) = super::conv_fast::try_conv2d(input, weights, bias, padding, oh, ow) {
            return Ok(out);
        }
    }

    let mut out = Tensor::zeros(Shape::new(is.n, oc, oh, ow));
    let in_data = input.data();
    let w_data = weights.data();
    let plane = oh * ow;

    out.data_mut()
        .par_chunks_mut(plane)
        .enumerate()
        .for_each(|(pi, out_plane)| {
            let n = pi / oc;
            let o = pi % oc;
            out_plane.fill(bias[o]);
            for i in 0..ic {
                let in_plane = &in_data[(n * ic + i) * is.h * is.w..(n * ic + i + 1) * is.h * is.w];
                for ky in 0..k {
                    let (oy_lo, oy_hi) = valid_range(oh, is.h, ky, stride, padding);
                    for kx in 0..k {
                        let w = w_data[((o * ic + i) * k + ky) * k + kx];
                        let (ox_lo, ox_hi) = valid_range(ow, is.w, kx, stride, padding);
                        if ox_lo >= ox_hi {
                            continue;
                        }
                        if stride == 1 {
                            for oy in oy_lo..oy_hi {
                                let iy = oy + ky - padding;
                                let ix0 = ox_lo + kx - padding;
                                let in_row = &in_plane[iy * is.w + ix0..iy * is.w + ix0 + (ox_hi - ox_lo)];
                                let out_row = &mut out_plane[oy * ow + ox_lo..oy * ow + ox_hi];
                                T::axpy(out_row, in_row, w);
                            }
                        } else {
                            for oy in oy_lo..oy_hi {
                                let iy = oy * stride + ky - padding;
                                for ox in ox_lo..ox_hi {
                                    let ix = ox * stride + kx - padding;
                                    let idx = oy * ow + ox;
                                    out_plane[idx] = out_plane[idx] + w * in_plane[iy * is.w + ix];
                                }
                            }
                        }
                    }
                }
            }
        });
    Ok(out)
}

/// Gradients of a convolution. `input` is `None` when the input does not
/// require gradient (e.g. data leaves).
pub struct Conv2dGrads<T> {
    pub input: Option<Tensor<T>>,
    pub weights: Tensor<T>,
    pub bias: Vec<T>,
}

pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    stride: usize,
    padding: usize,
    grad_out: &Tensor<T>,
    need_input_grad: bool,
) -> Conv2dGrads<T> {
    let is = input.shape();
    let ws = weights.shape();
    let os = grad_out.shape();
    let (oc, ic, k) = (ws.n, ws.c, ws.h);
    let (oh, ow) = (os.h, os.w);
    let w_data = weights.data();
    let g_data = grad_out.data();

    let grad_input = if !need_input_grad {
        None
    } else if let Some(gi) = (stride == 1)
        .then(|| super::conv_fast::try_grad_input(weights, padding, grad_out, is))
        .flatten()
    {
        Some(gi)
    } else {
        let mut gi = Tensor::zeros(is);
        let in_plane_len = is.h * is.w;
        gi.data_mut()
            .par_chunks_mut(in_plane_len)
            .enumerate()
            .for_each(|(pi, gin_plane)| {
                let n = pi / ic;
                let i = pi % ic;
                for o in 0..oc {
                    let gout_plane = &g_data[(n * oc + o) * oh * ow..(n * oc + o + 1) * oh * ow];
                    for ky in 0..k {
                        let (oy_lo, oy_hi) = valid_range(oh, is.h, ky, stride, padding);
                        for kx in 0..k {
                            let w = w_data[((o * ic + i) * k + ky) * k + kx];
                            let (ox_lo, ox_hi) = valid_range(ow, is.w, kx, stride, padding);
                            if ox_lo >= ox_hi {
                                continue;
                            }
                            if stride == 1 {
                                for oy in oy_lo..oy_hi {
                                    let iy = oy + ky - padding;
                                    let ix0 = ox_lo + kx - padding;
                                    let gin_row =
                                        &mut gin_plane[iy * is.w + ix0..iy * is.w + ix0 + (ox_hi - ox_lo)];
                                    let gout_row = &gout_plane[oy * ow + ox_lo..oy * ow + ox_hi];
                                    T::axpy(gin_row, gout_row, w);
                                }
                            } else {
                                for oy in oy_lo..oy_hi {
                                    let iy = oy * stride + ky - padding;
                                    for ox in ox_lo..ox_hi {
                                        let ix = ox * stride + kx - padding;
                                        let idx = iy * is.w + ix;
                                        gin_plane[idx] = gin_plane[idx] + w * gout_plane[oy * ow + ox];
                                    }
                                }
                            }
                        }
                    }
                }
            });
        Some(gi)
    };

    let gw = if let Some(gw) = (stride == 1)
        .then(|| super::conv_fast::try_grad_weights(input, ws, padding, grad_out))
        .flatten()
    {
        gw
    } else {
        grad_weights_generic(input, ws, stride, padding, grad_out)
    };

    let mut gb = vec![T::zero(); oc];
    for n in 0..os.n {
        for (o, gbo) in gb.iter_mut().enumerate() {
            let plane = &g_data[(n * oc + o) * oh * ow..(n * oc + o + 1) * oh * ow];
            let mut s = T::zero();
            for &v in plane {
                s = s + v;
            }
            *gbo = *gbo + s;
        }
    }

    Conv2dGrads { input: grad_input, weights: gw, bias: gb }
}

fn grad_weights_generic<T: Scalar>(
    input: &Tensor<T>,
    ws: Shape,
    stride: usize,
    padding: usize,
    grad_out: &Tensor<T>,
) -> Tensor<T> {
    let is = input.shape();
    let os = grad_out.shape();
    let (oc, ic, k) = (ws.n, ws.c, ws.h);
    let (oh, ow) = (os.h, os.w);
    let in_data = input.data();
    let g_data = grad_out.data();
    let mut gw = Tensor::zeros(ws);
    gw.data_mut()
        .par_chunks_mut(k * k)
        .enumerate()
        .for_each(|(pair, gw_block)| {
            let o = pair / ic;
            let i = pair % ic;
            for ky in 0..k {
                let (oy_lo, oy_hi) = valid_range(oh, is.h, ky, stride, padding);
                for kx in 0..k {
                    let (ox_lo, ox_hi) = valid_range(ow, is.w, kx, stride, padding);
                    let mut acc = T::zero();
                    for n in 0..os.n {
                        let gout_plane = &g_data[(n * oc + o) * oh * ow..(n * oc + o + 1) * oh * ow];
                        let in_plane =
                            &in_data[(n * ic + i) * is.h * is.w..(n * ic + i + 1) * is.h * is.w];
                        if ox_lo >= ox_hi {
                            continue;
                        }
                        if stride == 1 {
                            for oy in oy_lo..oy_hi {
                                let iy = oy + ky - padding;
                                let ix0 = ox_lo + kx - padding;
                                let gout_row = &gout_plane[oy * ow + ox_lo..oy * ow + ox_hi];
                                let in_row =
                                    &in_plane[iy * is.w + ix0..iy * is.w + ix0 + (ox_hi - ox_lo)];
                                acc = acc + T::dot(gout_row, in_row);
                            }
                        } else {
                            for oy in oy_lo..oy_hi {
                                let iy = oy * stride + ky - padding;
                                for ox in ox_lo..ox_hi {
                                    let ix = ox * stride + kx - padding;
                                    acc = acc + gout_plane[oy * ow + ox] * in_plane[iy * is.w + ix];
                                }
                            }
                        }
                    }
                    gw_block[ky * k + kx] = acc;
                }
            }
        });
    gw
}

/// Affine map on a plain vector: `out_j = sum_i w_ji x_i + b_j`.
pub fn linear<T: Scalar>(input: &[T], params: &LinearParams<T>) -> Result<Vec<T>> {
    params.validate()?;
    if input.len() != params.inputs {
        return Err(Error::Dimension(format!(
            "linear input length {} does not match {} inputs",
            input.len(),
            params.inputs
        )));
    }
    let mut out = Vec::with_capacity(params.outputs);
    for j in 0..params.outputs {
        let row = &params.weights[j * params.inputs..(j + 1) * params.inputs];
        out.push(T::dot(row, input) + params.bias[j]);
    }
    Ok(out)
}

/// Batched affine map on tensors shaped `(batch, features, 1, 1)` with
/// weights `(m, n, 1, 1)` and bias length `m`.
pub fn linear_raw<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &[T]) -> Result<Tensor<T>> {
    let is = input.shape();
    let ws = weights.shape();
    let (m, n) = (ws.n, ws.c);
    if is.h != 1 || is.w != 1 || ws.h != 1 || ws.w != 1 {
        return Err(Error::Dimension("linear operands must have 1x1 spatial extent".into()));
    }
    if is.c != n {
        return Err(Error::Dimension(format!(
            "linear input has {} features but weights expect {n}",
            is.c
        )));
    }
    if bias.len() != m {
        return Err(Error::Dimension("linear bias length mismatch".into()));
    }
    let mut out = Tensor::zeros(Shape::new(is.n, m, 1, 1));
    for b in 0..is.n {
        let x = &input.data()[b * n..(b + 1) * n];
        for j in 0..m {
            let row = &weights.data()[j * n..(j + 1) * n];
            out.data_mut()[b * m + j] = T::dot(row, x) + bias[j];
        }
    }
    Ok(out)
}

pub struct LinearGrads<T> {
    pub input: Option<Tensor<T>>,
    pub weights: Tensor<T>,
    pub bias: Vec<T>,
}

pub fn linear_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    grad_out: &Tensor<T>,
    need_input_grad: bool,
) -> LinearGrads<T> {
    let is = input.shape();
    let ws = weights.shape();
    let (m, n) = (ws.n, ws.c);

    let grad_input = if need_input_grad {
        let mut gi = Tensor::zeros(is);
        for b in 0..is.n {
            let g = &grad_out.data()[b * m..(b + 1) * m];
            let gi_row = &mut gi.data_mut()[b * n..(b + 1) * n];
            for j in 0..m {
                let row = &weights.data()[j * n..(j + 1) * n];
                T::axpy(gi_row, row, g[j]);
            }
        }
        Some(gi)
    } else {
        None
    };

    let mut gw = Tensor::zeros(ws);
    let mut gb = vec![T::zero(); m];
    for b in 0..is.n {
        let g = &grad_out.data()[b * m..(b + 1) * m];
        let x = &input.data()[b * n..(b + 1) * n];
        for j in 0..m {
            let gw_row = &mut gw.data_mut()[j * n..(j + 1) * n];
            T::axpy(gw_row, x, g[j]);
            gb[j] = gb[j] + g[j];
        }
    }
    LinearGrads { input: grad_input, weights: gw, bias: gb }
}

/// Elementwise nonlinearity.
pub fn activation<T: Scalar>(input: &Tensor<T>, kind: ActKind<T>) -> Tensor<T> {
    let mut out = input.clone();
    match kind {
        ActKind::Relu => {
            for v in out.data_mut() {
                if *v < T::zero() {
                    *v = T::zero();
                }
            }
        }
        ActKind::LeakyRelu(slope) => {
            for v in out.data_mut() {
                if *v < T::zero() {
                    *v = *v * slope;
                }
            }
        }
        ActKind::Tanh => {
            for v in out.data_mut() {
                *v = v.tanh();
            }
        }
        ActKind::Sigmoid => {
            for v in out.data_mut() {
                *v = T::one() / (T::one() + (-*v).exp());
            }
        }
    }
    out
}

pub fn activation_backward<T: Scalar>(
    input: &Tensor<T>,
    output: &Tensor<T>,
    grad_out: &[T],
    kind: ActKind<T>,
) -> Vec<T> {
    let mut g = grad_out.to_vec();
    match kind {
        ActKind::Relu => {
            for (gv, &x) in g.iter_mut().zip(input.data()) {
                if x <= T::zero() {
                    *gv = T::zero();
                }
            }
        }
        ActKind::LeakyRelu(slope) => {
            for (gv, &x) in g.iter_mut().zip(input.data()) {
                if x <= T::zero() {
                    *gv = *gv * slope;
                }
            }
        }
        ActKind::Tanh => {
            for (gv, &y) in g.iter_mut().zip(output.data()) {
                *gv = *gv * (T::one() - y * y);
            }
        }
        ActKind::Sigmoid => {
            for (gv, &y) in g.iter_mut().zip(output.data()) {
                *gv = *gv * y * (T::one() - y);
            }
        }
    }
    g
}

/// Mean pooling over k x k windows.
pub fn avg_pool2d<T: Scalar>(input: &Tensor<T>, k: usize, stride: usize) -> Result<Tensor<T>> {
    let is = input.shape();
    if is.h < k || is.w < k {
        return Err(Error::Dimension(format!(
            "pooling window {k} exceeds input extent {}x{}",
            is.h, is.w
        )));
    }
    let oh = (is.h - k) / stride + 1;
    let ow = (is.w - k) / stride + 1;
    let inv = T::one() / T::from_f64((k * k) as f64);
    let mut out = Tensor::zeros(Shape::new(is.n, is.c, oh, ow));
    let planes = is.n * is.c;
    for p in 0..planes {
        let in_plane = &input.data()[p * is.h * is.w..(p + 1) * is.h * is.w];
        let out_plane = &mut out.data_mut()[p * oh * ow..(p + 1) * oh * ow];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut s = T::zero();
                for wy in 0..k {
                    let row = (oy * stride + wy) * is.w + ox * stride;
                    for wx in 0..k {
                        s = s + in_plane[row + wx];
                    }
                }
                out_plane[oy * ow + ox] = s * inv;
            }
        }
    }
    Ok(out)
}

pub fn avg_pool2d_backward<T: Scalar>(
    in_shape: Shape,
    k: usize,
    stride: usize,
    grad_out: &Tensor<T>,
) -> Tensor<T> {
    let os = grad_out.shape();
    let inv = T::one() / T::from_f64((k * k) as f64);
    let mut gi = Tensor::zeros(in_shape);
    let planes = in_shape.n * in_shape.c;
    for p in 0..planes {
        let g_plane = &grad_out.data()[p * os.h * os.w..(p + 1) * os.h * os.w];
        let gi_plane = &mut gi.data_mut()[p * in_shape.h * in_shape.w..(p + 1) * in_shape.h * in_shape.w];
        for oy in 0..os.h {
            for ox in 0..os.w {
                let g = g_plane[oy * os.w + ox] * inv;
                for wy in 0..k {
                    let row = (oy * stride + wy) * in_shape.w + ox * stride;
                    for wx in 0..k {
                        gi_plane[row + wx] = gi_plane[row + wx] + g;
                    }
                }
            }
        }
    }
    gi
}

/// Mean squared error over all elements.
pub fn mse_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<T> {
    if pred.shape() != target.shape() {
        return Err(Error::Dimension(format!(
            "mse operands differ: {} vs {}",
            pred.shape(),
            target.shape()
        )));
    }
    let mut s = T::zero();
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        let d = p - t;
        s = s + d * d;
    }
    Ok(s / T::from_f64(pred.numel() as f64))
}

pub fn mse_loss_backward<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>, upstream: T) -> Vec<T> {
    let scale = upstream * T::from_f64(2.0 / pred.numel() as f64);
    pred.data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| scale * (p - t))
        .collect()
}

/// Binary cross entropy, averaged over elements. Predictions are clamped
/// to `[BCE_EPS, 1 - BCE_EPS]` so the boundary labels stay finite.
pub fn bce_loss<T: Scalar>(pred: &[T], labels: &[T]) -> Result<T> {
    if pred.len() != labels.len() {
        return Err(Error::Dimension("bce prediction/label counts differ".into()));
    }
    if pred.is_empty() {
        return Err(Error::Dimension("bce needs at least one prediction".into()));
    }
    let eps = T::from_f64(BCE_EPS);
    let one = T::one();
    let mut s = T::zero();
    for (&p, &y) in pred.iter().zip(labels) {
        let x = p.max(eps).min(one - eps);
        s = s - y * x.ln() - (one - y) * (one - x).ln();
    }
    Ok(s / T::from_f64(pred.len() as f64))
}

pub fn bce_loss_backward<T: Scalar>(pred: &[T], labels: &[T], upstream: T) -> Vec<T> {
    let eps = T::from_f64(BCE_EPS);
    let one = T::one();
    let scale = upstream / T::from_f64(pred.len() as f64);
    pred.iter()
        .zip(labels)
        .map(|(&p, &y)| {
            if p < eps || p > one - eps {
                // Clamped region: flat.
                T::zero()
            } else {
                scale * (-y / p + (one - y) / (one - p))
            }
        })
        .collect()
}

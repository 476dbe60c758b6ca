//! Layer kernels with their exact adjoints.
//!
//! Every forward here has a matching backward that returns (or accumulates)
//! the vector-Jacobian product. The graph executor in [`super::graph`] only
//! wires these together.

use crate::error::{Error, Result};

use super::rng::RngState;
use super::scalar::{gemm, Scalar, Trans};
use super::tensor::Tensor3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Padding {
    Valid,
    /// Symmetric zero padding; an odd total puts the extra sample on the right.
    Same,
    /// `dilation·(kernel−1)` zeros on the left only.
    Causal,
}

impl Padding {
    pub fn name(self) -> &'static str {
        match self {
            Padding::Valid => "valid",
            Padding::Same => "same",
            Padding::Causal => "causal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    None,
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PoolKind {
    Max,
    Avg,
}

/// Static description of a 1D convolution; weights are `[out, in, kernel]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub dilation: usize,
    pub stride: usize,
    pub padding: Padding,
}

impl ConvGeometry {
    /// `(left, right)` zero padding.
    pub fn pads(&self) -> (usize, usize) {
        let total = self.dilation * (self.kernel - 1);
        match self.padding {
            Padding::Valid => (0, 0),
            Padding::Causal => (total, 0),
            Padding::Same => (total / 2, total - total / 2),
        }
    }

    /// Output length for an input of `len` samples.
    pub fn out_len(&self, len: usize) -> Result<usize> {
        if self.kernel == 0 || self.dilation == 0 || self.stride == 0 {
            return Err(Error::invalid(format!(
                "conv1d: kernel, dilation and stride must be positive ({self:?})"
            )));
        }
        let (l, r) = self.pads();
        let span = self.dilation * (self.kernel - 1) + 1;
        let padded = len + l + r;
        if padded < span {
            return Err(Error::invalid(format!(
                "conv1d: output length would be <= 0 (input {len}, span {span}, padding {})",
                self.padding.name()
            )));
        }
        Ok((padded - span) / self.stride + 1)
    }

    pub fn weight_len(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1
    }
}

/// Unrolls one example into a `(in·kernel) × out_len` patch matrix.
fn im2col<T: Scalar>(x: &[T], len: usize, g: &ConvGeometry, out_len: usize, col: &mut [T]) {
    let (pad_l, _) = g.pads();
    for i in 0..g.in_channels {
        let src = &x[i * len..(i + 1) * len];
        for kk in 0..g.kernel {
            let row = &mut col[(i * g.kernel + kk) * out_len..(i * g.kernel + kk + 1) * out_len];
            let offset = (kk * g.dilation) as isize - pad_l as isize;
            if g.stride == 1 {
                // Valid outputs t satisfy 0 <= t + offset < len.
                let lo = (-offset).clamp(0, out_len as isize) as usize;
                let hi = (len as isize - offset).clamp(0, out_len as isize) as usize;
                row[..lo].fill(T::zero());
                if hi > lo {
                    let s = (lo as isize + offset) as usize;
                    row[lo..hi].copy_from_slice(&src[s..s + (hi - lo)]);
                }
                if hi < out_len {
                    row[hi.max(lo)..].fill(T::zero());
                }
            } else {
                for (t, v) in row.iter_mut().enumerate() {
                    let p = (t * g.stride) as isize + offset;
                    *v = if p >= 0 && (p as usize) < len {
                        src[p as usize]
                    } else {
                        T::zero()
                    };
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto the input.
fn col2im<T: Scalar>(col: &[T], len: usize, g: &ConvGeometry, out_len: usize, dx: &mut [T]) {
    let (pad_l, _) = g.pads();
    for i in 0..g.in_channels {
        let dst = &mut dx[i * len..(i + 1) * len];
        for kk in 0..g.kernel {
            let row = &col[(i * g.kernel + kk) * out_len..(i * g.kernel + kk + 1) * out_len];
            let offset = (kk * g.dilation) as isize - pad_l as isize;
            for (t, &v) in row.iter().enumerate() {
                let p = (t * g.stride) as isize + offset;
                if p >= 0 && (p as usize) < len {
                    dst[p as usize] += v;
                }
            }
        }
    }
}

fn check_conv_input<T: Scalar>(
    x: &Tensor3<T>,
    weights: &[T],
    bias: &[T],
    g: &ConvGeometry,
) -> Result<()> {
    if x.channels() != g.in_channels {
        return Err(Error::shape(
            "conv1d input channels",
            g.in_channels,
            x.channels(),
        ));
    }
    if weights.len() != g.weight_len() {
        return Err(Error::shape(
            "conv1d weights",
            g.weight_len(),
            weights.len(),
        ));
    }
    if bias.len() != g.out_channels {
        return Err(Error::shape("conv1d bias", g.out_channels, bias.len()));
    }
    Ok(())
}

/// Cross-correlation (no kernel flip), the deep-learning convention.
pub fn conv1d<T: Scalar>(
    x: &Tensor3<T>,
    weights: &[T],
    bias: &[T],
    g: &ConvGeometry,
) -> Result<Tensor3<T>> {
    check_conv_input(x, weights, bias, g)?;
    let len = x.length();
    let out_len = g.out_len(len)?;
    let kdim = g.in_channels * g.kernel;
    let mut y = Tensor3::zeros(x.batch(), g.out_channels, out_len);
    let mut col = if g.is_pointwise() && g.pads() == (0, 0) {
        Vec::new()
    } else {
        vec![T::zero(); kdim * out_len]
    };
    for b in 0..x.batch() {
        let xb = x.example(b);
        let yb = y.example_mut(b);
        for (o, row) in yb.chunks_exact_mut(out_len).enumerate() {
            row.fill(bias[o]);
        }
        let patches: &[T] = if col.is_empty() {
            xb
        } else {
            im2col(xb, len, g, out_len, &mut col);
            &col
        };
        gemm(
            g.out_channels,
            kdim,
            out_len,
            weights,
            Trans::No,
            patches,
            Trans::No,
            T::one(),
            yb,
        );
    }
    Ok(y)
}

/// Accumulates weight and bias gradients; returns the input gradient when asked.
#[allow(clippy::too_many_arguments)]
pub fn conv1d_backward<T: Scalar>(
    x: &Tensor3<T>,
    weights: &[T],
    g: &ConvGeometry,
    dy: &Tensor3<T>,
    dweights: &mut [T],
    dbias: &mut [T],
    need_dx: bool,
) -> Option<Tensor3<T>> {
    let len = x.length();
    let out_len = dy.length();
    let kdim = g.in_channels * g.kernel;
    let direct = g.is_pointwise() && g.pads() == (0, 0);
    let mut col = if direct {
        Vec::new()
    } else {
        vec![T::zero(); kdim * out_len]
    };
    let mut dcol = if direct {
        Vec::new()
    } else {
        vec![T::zero(); kdim * out_len]
    };
    let mut dx = need_dx.then(|| Tensor3::zeros(x.batch(), x.channels(), len));
    for b in 0..x.batch() {
        let dyb = dy.example(b);
        for (o, row) in dyb.chunks_exact(out_len).enumerate() {
            dbias[o] += row.iter().copied().sum::<T>();
        }
        let patches: &[T] = if direct {
            x.example(b)
        } else {
            im2col(x.example(b), len, g, out_len, &mut col);
            &col
        };
        // dW (out × kdim) += dY (out × L) · colᵀ (L × kdim)
        gemm(
            g.out_channels,
            out_len,
            kdim,
            dyb,
            Trans::No,
            patches,
            Trans::Yes,
            T::one(),
            dweights,
        );
        if let Some(dx) = dx.as_mut() {
            if direct {
                gemm(
                    kdim,
                    g.out_channels,
                    out_len,
                    weights,
                    Trans::Yes,
                    dyb,
                    Trans::No,
                    T::one(),
                    dx.example_mut(b),
                );
            } else {
                gemm(
                    kdim,
                    g.out_channels,
                    out_len,
                    weights,
                    Trans::Yes,
                    dyb,
                    Trans::No,
                    T::zero(),
                    &mut dcol,
                );
                col2im(&dcol, len, g, out_len, dx.example_mut(b));
            }
        }
    }
    dx
}

/// Per-channel statistics used by one batch-norm application.
#[derive(Debug, Clone)]
pub struct BatchNormStats<T> {
    pub mean: Vec<T>,
    pub inv_std: Vec<T>,
}

#[derive(Debug, Clone, Copy)]
pub struct BatchNormConfig {
    pub momentum: f64,
    pub eps: f64,
}

impl Default for BatchNormConfig {
    fn default() -> Self {
        BatchNormConfig {
            momentum: 0.9,
            eps: 1e-5,
        }
    }
}

/// Batch normalization over `batch × length` per channel.
///
/// In train mode the batch statistics are used and the running buffers are
/// updated as `running ← momentum·running + (1−momentum)·batch`. In eval mode
/// the running buffers are used as-is.
#[allow(clippy::too_many_arguments)]
pub fn batch_norm1d<T: Scalar>(
    x: &Tensor3<T>,
    gamma: &[T],
    beta: &[T],
    running_mean: &mut [T],
    running_var: &mut [T],
    mode: Mode,
    cfg: BatchNormConfig,
) -> Result<(Tensor3<T>, BatchNormStats<T>)> {
    let [nb, nc, nl] = x.dims();
    for (what, len) in [
        ("gamma", gamma.len()),
        ("beta", beta.len()),
        ("running_mean", running_mean.len()),
        ("running_var", running_var.len()),
    ] {
        if len != nc {
            return Err(Error::shape(format!("batch_norm1d {what}"), nc, len));
        }
    }
    let eps = T::of(cfg.eps);
    let (mean, var): (Vec<T>, Vec<T>) = match mode {
        Mode::Eval => (running_mean.to_vec(), running_var.to_vec()),
        Mode::Train => {
            let count = T::of((nb * nl) as f64);
            let mut mean = vec![T::zero(); nc];
            let mut var = vec![T::zero(); nc];
            for c in 0..nc {
                let mut s = T::zero();
                for b in 0..nb {
                    s += x.example(b)[c * nl..(c + 1) * nl]
                        .iter()
                        .copied()
                        .sum::<T>();
                }
                let m = s / count;
                let mut v = T::zero();
                for b in 0..nb {
                    v += x.example(b)[c * nl..(c + 1) * nl]
                        .iter()
                        .map(|&xi| (xi - m) * (xi - m))
                        .sum::<T>();
                }
                mean[c] = m;
                var[c] = v / count;
            }
            let mom = T::of(cfg.momentum);
            for c in 0..nc {
                running_mean[c] = mom * running_mean[c] + (T::one() - mom) * mean[c];
                running_var[c] = mom * running_var[c] + (T::one() - mom) * var[c];
            }
            (mean, var)
        }
    };
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut y = Tensor3::zeros(nb, nc, nl);
    for b in 0..nb {
        let xb = x.example(b);
        let yb = y.example_mut(b);
        for c in 0..nc {
            let scale = gamma[c] * inv_std[c];
            let shift = beta[c] - mean[c] * scale;
            for (yo, &xi) in yb[c * nl..(c + 1) * nl]
                .iter_mut()
                .zip(&xb[c * nl..(c + 1) * nl])
            {
                *yo = xi * scale + shift;
            }
        }
    }
    Ok((y, BatchNormStats { mean, inv_std }))
}

#[allow(clippy::too_many_arguments)]
pub fn batch_norm1d_backward<T: Scalar>(
    x: &Tensor3<T>,
    gamma: &[T],
    stats: &BatchNormStats<T>,
    mode: Mode,
    dy: &Tensor3<T>,
    dgamma: &mut [T],
    dbeta: &mut [T],
) -> Tensor3<T> {
    let [nb, nc, nl] = x.dims();
    let count = T::of((nb * nl) as f64);
    let mut dx = Tensor3::zeros(nb, nc, nl);
    for c in 0..nc {
        let (m, is) = (stats.mean[c], stats.inv_std[c]);
        let mut sum_dy = T::zero();
        let mut sum_dy_xhat = T::zero();
        for b in 0..nb {
            let xs = &x.example(b)[c * nl..(c + 1) * nl];
            let ds = &dy.example(b)[c * nl..(c + 1) * nl];
            for (&xi, &di) in xs.iter().zip(ds) {
                sum_dy += di;
                sum_dy_xhat += di * (xi - m) * is;
            }
        }
        dgamma[c] += sum_dy_xhat;
        dbeta[c] += sum_dy;
        let k = gamma[c] * is;
        for b in 0..nb {
            let xs = &x.example(b)[c * nl..(c + 1) * nl];
            let ds = &dy.example(b)[c * nl..(c + 1) * nl];
            let dxs = &mut dx.example_mut(b)[c * nl..(c + 1) * nl];
            match mode {
                Mode::Eval => {
                    for (o, &di) in dxs.iter_mut().zip(ds) {
                        *o = di * k;
                    }
                }
                Mode::Train => {
                    let mean_dy = sum_dy / count;
                    let mean_dy_xhat = sum_dy_xhat / count;
                    for ((o, &di), &xi) in dxs.iter_mut().zip(ds).zip(xs) {
                        let xhat = (xi - m) * is;
                        *o = k * (di - mean_dy - xhat * mean_dy_xhat);
                    }
                }
            }
        }
    }
    dx
}

/// Non-overlapping pooling with stride = size; a trailing remainder is dropped.
/// For max pooling the returned indices hold the winning offset inside each
/// window, the first maximum on ties.
pub fn pool1d<T: Scalar>(
    x: &Tensor3<T>,
    kind: PoolKind,
    size: usize,
) -> Result<(Tensor3<T>, Vec<u32>)> {
    if size < 1 {
        return Err(Error::invalid("pool1d: size must be >= 1"));
    }
    let [nb, nc, nl] = x.dims();
    let out_len = nl / size;
    let mut y = Tensor3::zeros(nb, nc, out_len);
    let mut arg = Vec::new();
    if kind == PoolKind::Max {
        arg.reserve(nb * nc * out_len);
    }
    let inv = T::one() / T::of(size as f64);
    for (xr, yr) in x
        .data()
        .chunks_exact(nl.max(1))
        .zip(y.data_mut().chunks_exact_mut(out_len.max(1)))
    {
        if out_len == 0 {
            break;
        }
        for (t, yo) in yr.iter_mut().enumerate() {
            let win = &xr[t * size..(t + 1) * size];
            match kind {
                PoolKind::Max => {
                    let mut best = 0;
                    for (j, &v) in win.iter().enumerate().skip(1) {
                        if v > win[best] {
                            best = j;
                        }
                    }
                    *yo = win[best];
                    arg.push(best as u32);
                }
                PoolKind::Avg => *yo = win.iter().copied().sum::<T>() * inv,
            }
        }
    }
    Ok((y, arg))
}

pub fn pool1d_backward<T: Scalar>(
    input_dims: [usize; 3],
    kind: PoolKind,
    size: usize,
    argmax: &[u32],
    dy: &Tensor3<T>,
) -> Tensor3<T> {
    let [nb, nc, nl] = input_dims;
    let out_len = dy.length();
    let mut dx = Tensor3::zeros(nb, nc, nl);
    if out_len == 0 {
        return dx;
    }
    let inv = T::one() / T::of(size as f64);
    for (row, (dxr, dyr)) in dx
        .data_mut()
        .chunks_exact_mut(nl)
        .zip(dy.data().chunks_exact(out_len))
        .enumerate()
    {
        for (t, &g) in dyr.iter().enumerate() {
            match kind {
                PoolKind::Max => dxr[t * size + argmax[row * out_len + t] as usize] += g,
                PoolKind::Avg => {
                    for v in &mut dxr[t * size..(t + 1) * size] {
                        *v += g * inv;
                    }
                }
            }
        }
    }
    dx
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn relu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

/// Derivative of an activation expressed through its output.
pub fn activation_grad_from_output<T: Scalar>(act: Activation, y: T) -> T {
    match act {
        Activation::None => T::one(),
        Activation::Relu => {
            if y > T::zero() {
                T::one()
            } else {
                T::zero()
            }
        }
        Activation::Tanh => T::one() - y * y,
    }
}

pub fn apply_activation<T: Scalar>(act: Activation, x: T) -> T {
    match act {
        Activation::None => x,
        Activation::Relu => relu(x),
        Activation::Tanh => x.tanh(),
    }
}

/// `y = act(x·Wᵀ + b)` with `x` flattened per example and `W` stored `[out, in]`.
pub fn dense<T: Scalar>(
    x: &Tensor3<T>,
    weights: &[T],
    bias: &[T],
    out_features: usize,
    act: Activation,
) -> Result<Tensor3<T>> {
    let nin = x.row_len();
    if weights.len() != out_features * nin {
        return Err(Error::shape(
            "dense input features",
            weights.len() / out_features.max(1),
            nin,
        ));
    }
    if bias.len() != out_features {
        return Err(Error::shape("dense bias", out_features, bias.len()));
    }
    let nb = x.batch();
    let mut y = Tensor3::zeros(nb, out_features, 1);
    for row in y.data_mut().chunks_exact_mut(out_features) {
        row.copy_from_slice(bias);
    }
    gemm(
        nb,
        nin,
        out_features,
        x.data(),
        Trans::No,
        weights,
        Trans::Yes,
        T::one(),
        y.data_mut(),
    );
    if act != Activation::None {
        for v in y.data_mut() {
            *v = apply_activation(act, *v);
        }
    }
    Ok(y)
}

#[allow(clippy::too_many_arguments)]
pub fn dense_backward<T: Scalar>(
    x: &Tensor3<T>,
    weights: &[T],
    y: &Tensor3<T>,
    act: Activation,
    dy: &Tensor3<T>,
    dweights: &mut [T],
    dbias: &mut [T],
    need_dx: bool,
) -> Option<Tensor3<T>> {
    let nb = x.batch();
    let nin = x.row_len();
    let nout = y.channels();
    let dz: Vec<T> = dy
        .data()
        .iter()
        .zip(y.data())
        .map(|(&g, &yo)| g * activation_grad_from_output(act, yo))
        .collect();
    for row in dz.chunks_exact(nout) {
        for (db, &g) in dbias.iter_mut().zip(row) {
            *db += g;
        }
    }
    // dW (out × in) += dZᵀ (out × B) · X (B × in)
    gemm(
        nout,
        nb,
        nin,
        &dz,
        Trans::Yes,
        x.data(),
        Trans::No,
        T::one(),
        dweights,
    );
    need_dx.then(|| {
        let mut dx = Tensor3::zeros(nb, x.channels(), x.length());
        gemm(
            nb,
            nout,
            nin,
            &dz,
            Trans::No,
            weights,
            Trans::No,
            T::zero(),
            dx.data_mut(),
        );
        dx
    })
}

/// Inverted dropout. Returns the output and the per-element scale mask
/// (`0` or `1/(1−rate)`); the mask is empty when the layer is an identity.
pub fn dropout<T: Scalar>(
    x: &Tensor3<T>,
    rate: f64,
    mode: Mode,
    rng: &mut RngState,
) -> Result<(Tensor3<T>, Vec<T>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!(
            "dropout rate {rate} outside [0, 1)"
        )));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok((x.clone(), Vec::new()));
    }
    let keep = T::of(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..x.data().len())
        .map(|_| {
            if rng.uniform() < rate {
                T::zero()
            } else {
                keep
            }
        })
        .collect();
    let mut y = x.clone();
    for (v, &m) in y.data_mut().iter_mut().zip(&mask) {
        *v *= m;
    }
    Ok((y, mask))
}

pub fn dropout_backward<T: Scalar>(mask: &[T], dy: &Tensor3<T>) -> Tensor3<T> {
    if mask.is_empty() {
        return dy.clone();
    }
    let mut dx = dy.clone();
    for (v, &m) in dx.data_mut().iter_mut().zip(mask) {
        *v *= m;
    }
    dx
}

/// WaveNet activation `tanh(filter) ⊙ sigmoid(gate)`.
pub fn gated_unit<T: Scalar>(filter_in: &Tensor3<T>, gate_in: &Tensor3<T>) -> Result<Tensor3<T>> {
    if filter_in.dims() != gate_in.dims() {
        return Err(Error::shape(
            "gated_unit",
            format!("{:?}", filter_in.dims()),
            format!("{:?}", gate_in.dims()),
        ));
    }
    let mut y = filter_in.clone();
    for (v, &g) in y.data_mut().iter_mut().zip(gate_in.data()) {
        *v = v.tanh() * sigmoid(g);
    }
    Ok(y)
}

pub fn gated_unit_backward<T: Scalar>(
    filter_in: &Tensor3<T>,
    gate_in: &Tensor3<T>,
    dy: &Tensor3<T>,
) -> (Tensor3<T>, Tensor3<T>) {
    let mut df = dy.clone();
    let mut dg = dy.clone();
    for (((f, g), &a), &b) in df
        .data_mut()
        .iter_mut()
        .zip(dg.data_mut().iter_mut())
        .zip(filter_in.data())
        .zip(gate_in.data())
    {
        let t = a.tanh();
        let s = sigmoid(b);
        let d = *f;
        *f = d * s * (T::one() - t * t);
        *g = d * t * s * (T::one() - s);
    }
    (df, dg)
}

/// Softmax over the channel axis at every `(batch, position)`.
pub fn softmax<T: Scalar>(x: &Tensor3<T>) -> Tensor3<T> {
    let [nb, nc, nl] = x.dims();
    let mut y = x.clone();
    for b in 0..nb {
        let ex = y.example_mut(b);
        for l in 0..nl {
            let mut mx = T::neg_infinity();
            for c in 0..nc {
                mx = mx.max(ex[c * nl + l]);
            }
            let mut s = T::zero();
            for c in 0..nc {
                let e = (ex[c * nl + l] - mx).exp();
                ex[c * nl + l] = e;
                s += e;
            }
            for c in 0..nc {
                ex[c * nl + l] /= s;
            }
        }
    }
    y
}

pub fn softmax_backward<T: Scalar>(y: &Tensor3<T>, dy: &Tensor3<T>) -> Tensor3<T> {
    let [nb, nc, nl] = y.dims();
    let mut dx = Tensor3::zeros(nb, nc, nl);
    for b in 0..nb {
        let (yb, db) = (y.example(b), dy.example(b));
        let dxb = dx.example_mut(b);
        for l in 0..nl {
            let dot: T = (0..nc).map(|c| yb[c * nl + l] * db[c * nl + l]).sum();
            for c in 0..nc {
                dxb[c * nl + l] = yb[c * nl + l] * (db[c * nl + l] - dot);
            }
        }
    }
    dx
}

/// Output of [`softmax_cross_entropy`].
#[derive(Debug, Clone)]
pub struct CrossEntropy<T> {
    /// Mean negative log-likelihood over the batch.
    pub loss: f64,
    /// `[batch × classes]` probabilities.
    pub probs: Tensor3<T>,
    /// Gradient of `loss` w.r.t. the logits, `(probs − onehot)/batch`.
    pub dlogits: Tensor3<T>,
}

/// Log-sum-exp stabilized softmax cross-entropy on `[batch × classes]` logits.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &Tensor3<T>,
    labels: &[u8],
) -> Result<CrossEntropy<T>> {
    softmax_cross_entropy_scaled(logits, labels, logits.batch())
}

/// Same as [`softmax_cross_entropy`] but normalized by `denominator` rather
/// than the batch length, for accumulating one mini-batch in slices.
pub fn softmax_cross_entropy_scaled<T: Scalar>(
    logits: &Tensor3<T>,
    labels: &[u8],
    denominator: usize,
) -> Result<CrossEntropy<T>> {
    let nb = logits.batch();
    let nc = logits.row_len();
    if labels.len() != nb {
        return Err(Error::shape(
            "softmax_cross_entropy labels",
            nb,
            labels.len(),
        ));
    }
    if let Some(&bad) = labels.iter().find(|&&l| (l as usize) >= nc) {
        return Err(Error::invalid(format!(
            "label {bad} out of range for {nc} classes"
        )));
    }
    let flat = logits.clone().reshape([nb, nc, 1])?;
    let mut probs = Tensor3::zeros(nb, nc, 1);
    let mut dlogits = Tensor3::zeros(nb, nc, 1);
    let mut total = 0.0f64;
    let inv = T::one() / T::of(denominator as f64);
    for b in 0..nb {
        let z = flat.example(b);
        let mx = z.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = mx + z.iter().map(|&v| (v - mx).exp()).sum::<T>().ln();
        total += (lse - z[labels[b] as usize]).f64();
        let p = probs.example_mut(b);
        for c in 0..nc {
            p[c] = (z[c] - lse).exp();
        }
        let d = dlogits.example_mut(b);
        for c in 0..nc {
            let onehot = if c == labels[b] as usize {
                T::one()
            } else {
                T::zero()
            };
            d[c] = (p[c] - onehot) * inv;
        }
    }
    Ok(CrossEntropy {
        loss: total / denominator as f64,
        probs,
        dlogits,
    })
}

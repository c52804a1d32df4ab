//! Forward and backward kernels for the layers used by the fixed architectures:
//! fully connected, 3x3 same-padded convolution, 2x2 max pooling, ReLU,
//! dropout and softmax cross-entropy.
//!
//! Matrix products go through `matrixmultiply::sgemm`, which accumulates in
//! `f32`. Convolutions are lowered to one GEMM per sample via im2col.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Whether convolution kernels may split work across the rayon pool.
///
/// `Serial` is the reference for bit reproducibility. `Parallel` computes the
/// same per-sample outputs but reduces kernel gradients in a different order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exec {
    #[default]
    Serial,
    Parallel,
}

/// `c = a · b` (or `c += a · b` when `accumulate`), with `a` logically
/// `[m, k]` and `b` logically `[k, n]`; the `*_t` flags mean the operand is
/// stored transposed.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    a_t: bool,
    b: &[f32],
    b_t: bool,
    c: &mut [f32],
    accumulate: bool,
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the asserts above guarantee every index sgemm touches lies
    // inside the slices for the given dimensions and strides.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn dims2(t: &Tensor, op: &'static str) -> Result<(usize, usize)> {
    t.expect_rank(2, op)?;
    Ok((t.shape()[0], t.shape()[1]))
}

fn dims4(t: &Tensor, op: &'static str) -> Result<(usize, usize, usize, usize)> {
    t.expect_rank(4, op)?;
    let s = t.shape();
    Ok((s[0], s[1], s[2], s[3]))
}

// ---------------------------------------------------------------------------
// Fully connected

/// `out[b, i] = bias[i] + Σ_j input[b, j] · weights[i, j]`.
pub fn linear_forward(input: &Tensor, weights: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
    let (batch, f_in) = dims2(input, "linear_forward")?;
    let (f_out, w_in) = dims2(weights, "linear_forward")?;
    if w_in != f_in {
        return Err(Error::ShapeMismatch {
            op: "linear_forward",
            left: input.shape().to_vec(),
            right: weights.shape().to_vec(),
        });
    }
    let mut out = vec![0.0f32; batch * f_out];
    if let Some(bias) = bias {
        if bias.shape() != [f_out] {
            return Err(Error::ShapeMismatch {
                op: "linear_forward(bias)",
                left: bias.shape().to_vec(),
                right: vec![f_out],
            });
        }
        for row in out.chunks_exact_mut(f_out) {
            row.copy_from_slice(bias.data());
        }
    }
    gemm(batch, f_in, f_out, input.data(), false, weights.data(), true, &mut out, bias.is_some());
    Tensor::new(vec![batch, f_out], out)
}

#[derive(Debug, Clone)]
pub struct LinearGrads {
    /// `None` when the caller asked to skip the input gradient.
    pub input: Option<Tensor>,
    pub weights: Tensor,
    pub bias: Tensor,
}

pub fn linear_backward(
    input: &Tensor,
    weights: &Tensor,
    grad_out: &Tensor,
    need_input_grad: bool,
) -> Result<LinearGrads> {
    let (batch, f_in) = dims2(input, "linear_backward")?;
    let (f_out, w_in) = dims2(weights, "linear_backward")?;
    if w_in != f_in || grad_out.shape() != [batch, f_out] {
        return Err(Error::ShapeMismatch {
            op: "linear_backward",
            left: grad_out.shape().to_vec(),
            right: vec![batch, f_out],
        });
    }
    let mut gw = vec![0.0f32; f_out * f_in];
    gemm(f_out, batch, f_in, grad_out.data(), true, input.data(), false, &mut gw, false);
    let mut gb = vec![0.0f32; f_out];
    for row in grad_out.data().chunks_exact(f_out) {
        for (acc, g) in gb.iter_mut().zip(row) {
            *acc += g;
        }
    }
    let gi = if need_input_grad {
        let mut gi = vec![0.0f32; batch * f_in];
        gemm(batch, f_out, f_in, grad_out.data(), false, weights.data(), false, &mut gi, false);
        Some(Tensor::new(vec![batch, f_in], gi)?)
    } else {
        None
    };
    Ok(LinearGrads {
        input: gi,
        weights: Tensor::new(vec![f_out, f_in], gw)?,
        bias: Tensor::new(vec![f_out], gb)?,
    })
}

// ---------------------------------------------------------------------------
// Convolution: 3x3, stride 1, zero padding 1

/// Kernel side length. Only 3x3 filters are supported.
pub const KSIZE: usize = 3;

fn im2col(sample: &[f32], c_in: usize, h: usize, w: usize, cols: &mut [f32]) {
    let hw = h * w;
    debug_assert_eq!(cols.len(), c_in * KSIZE * KSIZE * hw);
    for ci in 0..c_in {
        let plane = &sample[ci * hw..(ci + 1) * hw];
        for dy in 0..KSIZE {
            for dx in 0..KSIZE {
                let row = &mut cols[((ci * KSIZE + dy) * KSIZE + dx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + dy as isize - 1;
                    let dst = &mut row[y * w..(y + 1) * w];
                    if sy < 0 || sy >= h as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    for (x, d) in dst.iter_mut().enumerate() {
                        let sx = x as isize + dx as isize - 1;
                        *d = if sx < 0 || sx >= w as isize { 0.0 } else { src[sx as usize] };
                    }
                }
            }
        }
    }
}

fn col2im_add(cols: &[f32], c_in: usize, h: usize, w: usize, sample: &mut [f32]) {
    let hw = h * w;
    for ci in 0..c_in {
        let plane = &mut sample[ci * hw..(ci + 1) * hw];
        for dy in 0..KSIZE {
            for dx in 0..KSIZE {
                let row = &cols[((ci * KSIZE + dy) * KSIZE + dx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + dy as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for x in 0..w {
                        let sx = x as isize + dx as isize - 1;
                        if sx >= 0 && sx < w as isize {
                            plane[sy as usize * w + sx as usize] += row[y * w + x];
                        }
                    }
                }
            }
        }
    }
}

fn conv_dims(input: &Tensor, kernels: &Tensor, op: &'static str) -> Result<(usize, usize, usize, usize, usize)> {
    let (b, c_in, h, w) = dims4(input, op)?;
    let (c_out, k_in, kh, kw) = dims4(kernels, op)?;
    if k_in != c_in || kh != KSIZE || kw != KSIZE {
        return Err(Error::ShapeMismatch {
            op,
            left: input.shape().to_vec(),
            right: kernels.shape().to_vec(),
        });
    }
    Ok((b, c_in, c_out, h, w))
}

/// Cross-correlation with 3x3 kernels, stride 1 and zero padding 1, so the
/// output has the same spatial extent as the input.
pub fn conv2d_forward(input: &Tensor, kernels: &Tensor) -> Result<Tensor> {
    conv2d_forward_exec(input, kernels, Exec::Serial)
}

pub fn conv2d_forward_exec(input: &Tensor, kernels: &Tensor, exec: Exec) -> Result<Tensor> {
    let (b, c_in, c_out, h, w) = conv_dims(input, kernels, "conv2d_forward")?;
    let hw = h * w;
    let patch = c_in * KSIZE * KSIZE;
    let mut out = vec![0.0f32; b * c_out * hw];
    let per_sample = |(sample, dst): (&[f32], &mut [f32])| {
        let mut cols = vec![0.0f32; patch * hw];
        im2col(sample, c_in, h, w, &mut cols);
        gemm(c_out, patch, hw, kernels.data(), false, &cols, false, dst, false);
    };
    let chunks = input.data().chunks_exact(c_in * hw).zip(out.chunks_exact_mut(c_out * hw));
    match exec {
        Exec::Serial => chunks.for_each(per_sample),
        Exec::Parallel => chunks.par_bridge().for_each(per_sample),
    }
    Tensor::new(vec![b, c_out, h, w], out)
}

#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Option<Tensor>,
    pub kernels: Tensor,
}

pub fn conv2d_backward(
    input: &Tensor,
    kernels: &Tensor,
    grad_out: &Tensor,
    need_input_grad: bool,
) -> Result<ConvGrads> {
    conv2d_backward_exec(input, kernels, grad_out, need_input_grad, Exec::Serial)
}

pub fn conv2d_backward_exec(
    input: &Tensor,
    kernels: &Tensor,
    grad_out: &Tensor,
    need_input_grad: bool,
    exec: Exec,
) -> Result<ConvGrads> {
    let (b, c_in, c_out, h, w) = conv_dims(input, kernels, "conv2d_backward")?;
    if grad_out.shape() != [b, c_out, h, w] {
        return Err(Error::ShapeMismatch {
            op: "conv2d_backward",
            left: grad_out.shape().to_vec(),
            right: vec![b, c_out, h, w],
        });
    }
    let hw = h * w;
    let patch = c_in * KSIZE * KSIZE;

    // Per sample: kernel-gradient contribution and (optionally) input gradient.
    let sample_grads = |s: usize, gk: &mut [f32], gi: Option<&mut [f32]>| {
        let sample = &input.data()[s * c_in * hw..][..c_in * hw];
        let go = &grad_out.data()[s * c_out * hw..][..c_out * hw];
        let mut cols = vec![0.0f32; patch * hw];
        im2col(sample, c_in, h, w, &mut cols);
        gemm(c_out, hw, patch, go, false, &cols, true, gk, true);
        if let Some(gi) = gi {
            gemm(patch, c_out, hw, kernels.data(), true, go, false, &mut cols, false);
            col2im_add(&cols, c_in, h, w, gi);
        }
    };

    let mut gk = vec![0.0f32; c_out * patch];
    let mut gi = need_input_grad.then(|| vec![0.0f32; b * c_in * hw]);
    match exec {
        Exec::Serial => {
            for s in 0..b {
                let gi_s = gi.as_mut().map(|g| &mut g[s * c_in * hw..(s + 1) * c_in * hw]);
                sample_grads(s, &mut gk, gi_s);
            }
        }
        Exec::Parallel => {
            let partial = match gi.as_mut() {
                Some(gi) => gi
                    .par_chunks_mut(c_in * hw)
                    .enumerate()
                    .map(|(s, gi_s)| {
                        let mut part = vec![0.0f32; c_out * patch];
                        sample_grads(s, &mut part, Some(gi_s));
                        part
                    })
                    .reduce(|| vec![0.0f32; c_out * patch], add_vecs),
                None => (0..b)
                    .into_par_iter()
                    .map(|s| {
                        let mut part = vec![0.0f32; c_out * patch];
                        sample_grads(s, &mut part, None);
                        part
                    })
                    .reduce(|| vec![0.0f32; c_out * patch], add_vecs),
            };
            gk = partial;
        }
    }
    Ok(ConvGrads {
        input: gi.map(|g| Tensor::new(vec![b, c_in, h, w], g)).transpose()?,
        kernels: Tensor::new(vec![c_out, c_in, KSIZE, KSIZE], gk)?,
    })
}

fn add_vecs(mut a: Vec<f32>, b: Vec<f32>) -> Vec<f32> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

// ---------------------------------------------------------------------------
// Max pooling

/// 2x2 max pooling with stride 2. Returns the pooled tensor and, for each
/// output element, the flat index of the input element that won. Ties go to
/// the first element in row-major window order.
pub fn maxpool2x2_forward(input: &Tensor) -> Result<(Tensor, Vec<u32>)> {
    let (b, c, h, w) = dims4(input, "maxpool2x2_forward")?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::invalid(format!(
            "maxpool2x2 needs even spatial extents, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    let mut out = Vec::with_capacity(b * c * oh * ow);
    let mut idx = Vec::with_capacity(b * c * oh * ow);
    for plane in 0..b * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + 2 * oy * w + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = base + (2 * oy + dy) * w + 2 * ox + dx;
                    if x[i] > x[best] {
                        best = i;
                    }
                }
                out.push(x[best]);
                idx.push(best as u32);
            }
        }
    }
    Ok((Tensor::new(vec![b, c, oh, ow], out)?, idx))
}

pub fn maxpool2x2_backward(grad_out: &Tensor, argmax: &[u32], input_shape: &[usize]) -> Result<Tensor> {
    if grad_out.len() != argmax.len() {
        return Err(Error::ShapeMismatch {
            op: "maxpool2x2_backward",
            left: grad_out.shape().to_vec(),
            right: vec![argmax.len()],
        });
    }
    let mut gi = Tensor::zeros(input_shape);
    let dst = gi.data_mut();
    for (&g, &i) in grad_out.data().iter().zip(argmax) {
        let slot = dst
            .get_mut(i as usize)
            .ok_or_else(|| Error::invalid(format!("pooling index {i} outside input")))?;
        *slot += g;
    }
    Ok(gi)
}

// ---------------------------------------------------------------------------
// Activations, dropout, loss

pub fn relu_forward(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    for v in out.data_mut() {
        *v = v.max(0.0);
    }
    out
}

/// Gradient through ReLU given the forward input; the subgradient at 0 is 0.
pub fn relu_backward(grad_out: &Tensor, input: &Tensor) -> Result<Tensor> {
    if grad_out.shape() != input.shape() {
        return Err(Error::ShapeMismatch {
            op: "relu_backward",
            left: grad_out.shape().to_vec(),
            right: input.shape().to_vec(),
        });
    }
    let mut g = grad_out.clone();
    for (gv, &x) in g.data_mut().iter_mut().zip(input.data()) {
        if x <= 0.0 {
            *gv = 0.0;
        }
    }
    Ok(g)
}

/// Inverted dropout. In training mode each unit survives with probability
/// `1 - p` and is scaled by `1 / (1 - p)`; the returned mask holds those
/// per-unit multipliers. In evaluation mode the input is returned unchanged.
pub fn dropout_forward<R: Rng + ?Sized>(
    input: &Tensor,
    p: f32,
    rng: &mut R,
    train: bool,
) -> Result<(Tensor, Option<Vec<f32>>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid(format!("dropout rate {p} not in [0, 1)")));
    }
    if !train || p == 0.0 {
        return Ok((input.clone(), None));
    }
    let scale = 1.0 / (1.0 - p);
    let mask: Vec<f32> = (0..input.len())
        .map(|_| if rng.random::<f32>() < p { 0.0 } else { scale })
        .collect();
    let mut out = input.clone();
    for (v, m) in out.data_mut().iter_mut().zip(&mask) {
        *v *= m;
    }
    Ok((out, Some(mask)))
}

pub fn dropout_backward(grad_out: &Tensor, mask: Option<&[f32]>) -> Tensor {
    let mut g = grad_out.clone();
    if let Some(mask) = mask {
        for (v, m) in g.data_mut().iter_mut().zip(mask) {
            *v *= m;
        }
    }
    g
}

/// Mean softmax cross-entropy over the batch and its gradient with respect to
/// the logits, `(softmax(logits) - onehot) / batch`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[u8]) -> Result<(f32, Tensor)> {
    let (batch, classes) = dims2(logits, "softmax_cross_entropy")?;
    if labels.len() != batch {
        return Err(Error::ShapeMismatch {
            op: "softmax_cross_entropy",
            left: logits.shape().to_vec(),
            right: vec![labels.len()],
        });
    }
    let mut grad = vec![0.0f32; batch * classes];
    let mut total = 0.0f64;
    let inv_b = 1.0 / batch as f32;
    for ((row, g), &label) in logits
        .data()
        .chunks_exact(classes)
        .zip(grad.chunks_exact_mut(classes))
        .zip(labels)
    {
        let label = label as usize;
        if label >= classes {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let mut sum = 0.0f32;
        for (gv, &z) in g.iter_mut().zip(row) {
            *gv = (z - max).exp();
            sum += *gv;
        }
        total += (sum.ln() - (row[label] - max)) as f64;
        for gv in g.iter_mut() {
            *gv = *gv / sum * inv_b;
        }
        g[label] -= inv_b;
    }
    Ok(((total / batch as f64) as f32, Tensor::new(vec![batch, classes], grad)?))
}

/// Index of the largest logit per row (first index on ties).
pub fn argmax_rows(logits: &Tensor) -> Result<Vec<usize>> {
    let (_, classes) = dims2(logits, "argmax_rows")?;
    Ok(logits
        .data()
        .chunks_exact(classes)
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect())
}

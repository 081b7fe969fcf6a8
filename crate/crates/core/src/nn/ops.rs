use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// No padding; the kernel stays inside the input.
    Valid,
    /// Zero padding so the output has `ceil(size / stride)` positions; odd
    /// totals put the extra row/column after the input.
    Same,
}

impl Padding {
    /// Padding before and after one spatial dimension.
    pub fn amounts(self, size: usize, kernel: usize, stride: usize) -> (usize, usize) {
        match self {
            Padding::Valid => (0, 0),
            Padding::Same => {
                let out = size.div_ceil(stride);
                let total = ((out - 1) * stride + kernel).saturating_sub(size);
                (total / 2, total - total / 2)
            }
        }
    }
}

/// Dot product with eight interleaved partial sums. The summation order is
/// fixed, so results are reproducible.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let (a_body, a_tail) = a.split_at(a.len() - a.len() % 8);
    let (b_body, b_tail) = b.split_at(a_body.len());
    for (x, y) in a_body.chunks_exact(8).zip(b_body.chunks_exact(8)) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut tail = 0.0;
    for (x, y) in a_tail.iter().zip(b_tail) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

fn spatial_dims(input: &Tensor, op: &str) -> Result<(usize, usize, usize)> {
    match *input.shape() {
        [c, h, w] => Ok((c, h, w)),
        ref other => Err(Error::Shape(format!(
            "{op} expects a [channels, height, width] input, got {other:?}"
        ))),
    }
}

/// Output extent of a sliding window, or `None` if the window does not fit.
fn window_positions(size: usize, window: usize, stride: usize) -> Option<usize> {
    (window >= 1 && size >= window).then(|| (size - window) / stride + 1)
}

/// Shape of a `conv2d` output, checking every operand.
pub(crate) fn conv2d_shape(
    input: &[usize],
    kernel: &[usize],
    bias: Option<&[usize]>,
    stride: usize,
    padding: Padding,
) -> Result<Vec<usize>> {
    let (&[c, h, w], &[oc, kc, kh, kw]) = (input, kernel) else {
        return Err(Error::Shape(format!(
            "conv2d expects input [c, h, w] and kernel [out, in, kh, kw], got {input:?} and {kernel:?}"
        )));
    };
    if c != kc {
        return Err(Error::Shape(format!(
            "conv2d input {input:?} has {c} channels but kernel {kernel:?} expects {kc}"
        )));
    }
    if stride == 0 {
        return Err(Error::Shape("conv2d stride must be at least 1".into()));
    }
    if let Some(bias) = bias {
        if bias != [oc] {
            return Err(Error::Shape(format!(
                "conv2d bias {bias:?} does not match kernel {kernel:?}"
            )));
        }
    }
    let (top, bottom) = padding.amounts(h, kh, stride);
    let (left, right) = padding.amounts(w, kw, stride);
    match (
        window_positions(h + top + bottom, kh, stride),
        window_positions(w + left + right, kw, stride),
    ) {
        (Some(oh), Some(ow)) => Ok(vec![oc, oh, ow]),
        _ => Err(Error::Shape(format!(
            "conv2d kernel {kernel:?} does not fit input {input:?} with {padding:?} padding"
        ))),
    }
}

/// 2-D cross-correlation plus bias. Accumulates in `f64`.
pub fn conv2d(
    input: &Tensor,
    kernel: &Tensor,
    bias: Option<&Tensor>,
    stride: usize,
    padding: Padding,
) -> Result<Tensor> {
    let out_shape = conv2d_shape(
        input.shape(),
        kernel.shape(),
        bias.map(|b| b.shape()),
        stride,
        padding,
    )?;
    let (channels, h, w) = spatial_dims(input, "conv2d")?;
    let (kh, kw) = (kernel.shape()[2], kernel.shape()[3]);
    let (oc, oh, ow) = (out_shape[0], out_shape[1], out_shape[2]);

    let (top, bottom) = padding.amounts(h, kh, stride);
    let (left, right) = padding.amounts(w, kw, stride);
    let (ph, pw) = (h + top + bottom, w + left + right);
    let padded;
    let src: &[f64] = if top + bottom + left + right == 0 {
        input.data()
    } else {
        let mut buf = vec![0.0; channels * ph * pw];
        for c in 0..channels {
            for y in 0..h {
                let from = &input.data()[(c * h + y) * w..][..w];
                buf[(c * ph + y + top) * pw + left..][..w].copy_from_slice(from);
            }
        }
        padded = buf;
        &padded
    };

    // Gather every receptive field into a row laid out like one kernel,
    // so each output is a single dot product.
    let field = channels * kh * kw;
    let mut patches = vec![0.0; oh * ow * field];
    for (p, patch) in patches.chunks_exact_mut(field).enumerate() {
        let (oy, ox) = (p / ow, p % ow);
        for c in 0..channels {
            for ky in 0..kh {
                let row = &src[(c * ph + oy * stride + ky) * pw + ox * stride..][..kw];
                patch[(c * kh + ky) * kw..][..kw].copy_from_slice(row);
            }
        }
    }

    let mut out = Vec::with_capacity(oc * oh * ow);
    for (o, weights) in kernel.data().chunks_exact(field).enumerate() {
        let b = bias.map_or(0.0, |b| b.data()[o]);
        out.extend(
            patches
                .chunks_exact(field)
                .map(|patch| dot(weights, patch) + b),
        );
    }
    Tensor::new(out_shape, out)
}

pub(crate) fn maxpool2d_shape(input: &[usize], window: usize, stride: usize) -> Result<Vec<usize>> {
    let &[c, h, w] = input else {
        return Err(Error::Shape(format!(
            "maxpool2d expects a [channels, height, width] input, got {input:?}"
        )));
    };
    if stride == 0 {
        return Err(Error::Shape("maxpool2d stride must be at least 1".into()));
    }
    match (
        window_positions(h, window, stride),
        window_positions(w, window, stride),
    ) {
        (Some(oh), Some(ow)) => Ok(vec![c, oh, ow]),
        _ => Err(Error::Shape(format!(
            "maxpool2d window {window} does not fit input {input:?}"
        ))),
    }
}

pub fn maxpool2d(input: &Tensor, window: usize, stride: usize) -> Result<Tensor> {
    let out_shape = maxpool2d_shape(input.shape(), window, stride)?;
    let (channels, h, w) = spatial_dims(input, "maxpool2d")?;
    let (oh, ow) = (out_shape[1], out_shape[2]);
    let data = input.data();
    let mut out = Vec::with_capacity(channels * oh * ow);
    for c in 0..channels {
        let plane = &data[c * h * w..][..h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                for ky in 0..window {
                    let row = &plane[(oy * stride + ky) * w + ox * stride..][..window];
                    for &v in row {
                        best = best.max(v);
                    }
                }
                out.push(best);
            }
        }
    }
    Tensor::new(out_shape, out)
}

pub fn relu(input: &Tensor) -> Tensor {
    let data = input.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor::new(input.shape().to_vec(), data).expect("shape unchanged")
}

pub fn flatten(input: &Tensor) -> Tensor {
    Tensor::vector(input.data().to_vec())
}

pub(crate) fn dense_shape(
    input: &[usize],
    weights: &[usize],
    bias: Option<&[usize]>,
) -> Result<Vec<usize>> {
    let (&[len], &[out, inp]) = (input, weights) else {
        return Err(Error::Shape(format!(
            "dense expects input [n] and weights [out, n], got {input:?} and {weights:?}"
        )));
    };
    if len != inp {
        return Err(Error::Shape(format!(
            "dense input {input:?} does not match weights {weights:?}"
        )));
    }
    if let Some(bias) = bias {
        if bias != [out] {
            return Err(Error::Shape(format!(
                "dense bias {bias:?} does not match weights {weights:?}"
            )));
        }
    }
    Ok(vec![out])
}

/// `weights · input + bias` with `weights` shaped `[out, in]`.
pub fn dense(input: &Tensor, weights: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
    let out_shape = dense_shape(input.shape(), weights.shape(), bias.map(|b| b.shape()))?;
    let x = input.data();
    let out = weights
        .data()
        .chunks_exact(x.len())
        .enumerate()
        .map(|(o, row)| dot(row, x) + bias.map_or(0.0, |b| b.data()[o]))
        .collect();
    Tensor::new(out_shape, out)
}

/// `exp(z - max z)` normalized to sum to one.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    if logits.shape().len() != 1 || logits.is_empty() {
        return Err(Error::Shape(format!(
            "softmax expects a non-empty vector, got {:?}",
            logits.shape()
        )));
    }
    let max = logits
        .data()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.data().iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(Tensor::vector(exps.into_iter().map(|e| e / sum).collect()))
}

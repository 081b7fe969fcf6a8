//! Store-and-reload simulation of low-precision weight memory.
//!
//! Each parameter is encoded with a [`Codec`] and immediately decoded back to
//! `f64`, so the inference engine computes with exactly the values the
//! narrow storage format can hold.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fixed::{dequantize_fixed, quantize_fixed, FixedFormat};
use crate::nn::{Model, Tensor};
use crate::posit::{decode_normalized, decode_posit, encode_normalized, encode_posit, PositFormat};

/// Tensors at least this long are quantized on the rayon pool.
const PARALLEL_THRESHOLD: usize = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Codec {
    /// Full-precision baseline; values pass through unchanged.
    Identity,
    Posit(PositFormat),
    /// Posit scaled by `1 / maxpos` so the format spans `[-1, 1]`.
    NormalizedPosit(PositFormat),
    Fixed(FixedFormat),
}

impl Codec {
    /// Storage bits per weight. The identity codec models float32 storage.
    pub fn bits(self) -> u32 {
        match self {
            Codec::Identity => 32,
            Codec::Posit(f) | Codec::NormalizedPosit(f) => f.n(),
            Codec::Fixed(f) => f.total_bits(),
        }
    }

    /// Short family label, independent of bit width.
    pub fn family(self) -> String {
        match self {
            Codec::Identity => "identity".into(),
            Codec::Posit(f) => format!("posit_es{}", f.es()),
            Codec::NormalizedPosit(f) => format!("nposit_es{}", f.es()),
            Codec::Fixed(_) => "fixed".into(),
        }
    }

    /// Encode then decode a single value.
    pub fn round_trip(self, x: f64) -> Result<f64> {
        match self {
            Codec::Identity => {
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(Error::Domain(format!("non-finite value {x}")))
                }
            }
            Codec::Posit(f) => decode_posit(encode_posit(x, f)?),
            Codec::NormalizedPosit(f) => decode_normalized(encode_normalized(x, f)?),
            Codec::Fixed(f) => Ok(dequantize_fixed(quantize_fixed(x, f)?)),
        }
    }
}

impl fmt::Display for Codec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Codec::Identity => write!(f, "identity"),
            Codec::Posit(p) => write!(f, "posit {p}"),
            Codec::NormalizedPosit(p) => write!(f, "normalized posit {p}"),
            Codec::Fixed(q) => write!(f, "fixed {q}"),
        }
    }
}

/// Quantization error summary for one tensor or a whole model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantizationReport {
    pub bits_per_weight: u32,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
    pub weight_count: usize,
}

impl QuantizationReport {
    fn empty(bits_per_weight: u32) -> Self {
        Self {
            bits_per_weight,
            max_abs_error: 0.0,
            mean_abs_error: 0.0,
            weight_count: 0,
        }
    }

    /// Combined report, weighting the means by element count.
    pub fn merge(self, other: Self) -> Self {
        let count = self.weight_count + other.weight_count;
        let mean = if count == 0 {
            0.0
        } else {
            (self.mean_abs_error * self.weight_count as f64
                + other.mean_abs_error * other.weight_count as f64)
                / count as f64
        };
        Self {
            bits_per_weight: self.bits_per_weight,
            max_abs_error: self.max_abs_error.max(other.max_abs_error),
            mean_abs_error: mean,
            weight_count: count,
        }
    }
}

/// Replaces every element by its codec round trip.
pub fn quantize_tensor(t: &Tensor, codec: Codec) -> Result<(Tensor, QuantizationReport)> {
    let convert = |(i, &x): (usize, &f64)| {
        codec
            .round_trip(x)
            .map_err(|e| Error::Data(format!("element {i}: {e}")))
    };
    let data: Vec<f64> = if t.len() >= PARALLEL_THRESHOLD {
        t.data()
            .par_iter()
            .enumerate()
            .map(convert)
            .collect::<Result<_>>()?
    } else {
        t.data()
            .iter()
            .enumerate()
            .map(convert)
            .collect::<Result<_>>()?
    };

    let mut max_abs_error = 0.0f64;
    let mut sum = 0.0;
    for (q, x) in data.iter().zip(t.data()) {
        let err = (q - x).abs();
        max_abs_error = max_abs_error.max(err);
        sum += err;
    }
    let report = QuantizationReport {
        bits_per_weight: codec.bits(),
        max_abs_error,
        mean_abs_error: if data.is_empty() {
            0.0
        } else {
            sum / data.len() as f64
        },
        weight_count: data.len(),
    };
    Ok((Tensor::new(t.shape().to_vec(), data)?, report))
}

/// Quantizes every parameter of `model`. With `skip_bias`, bias tensors keep
/// their full-precision values and are left out of the report.
pub fn quantize_model(
    model: &Model,
    codec: Codec,
    skip_bias: bool,
) -> Result<(Model, QuantizationReport)> {
    let biases = model.bias_names();
    let mut report = QuantizationReport::empty(codec.bits());
    let quantized = model.map_params(|name, tensor| {
        if skip_bias && biases.contains(&name) {
            return Ok(tensor.clone());
        }
        let (q, r) = quantize_tensor(tensor, codec)
            .map_err(|e| Error::Data(format!("tensor `{name}`: {e}")))?;
        report = report.merge(r);
        Ok(q)
    })?;
    Ok((quantized, report))
}

/// Memory saved by storing `bits_a`-bit instead of `bits_b`-bit weights, in
/// percent rounded to one decimal place.
pub fn memory_reduction(bits_a: u32, bits_b: u32) -> Result<f64> {
    if bits_b == 0 {
        return Err(Error::Domain("reference bit width must be positive".into()));
    }
    if bits_a > bits_b {
        return Err(Error::Domain(format!(
            "{bits_a} bits is not a reduction from {bits_b} bits"
        )));
    }
    let percent = 100.0 * (1.0 - f64::from(bits_a) / f64::from(bits_b));
    Ok((percent * 10.0).round() / 10.0)
}

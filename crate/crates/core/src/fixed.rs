//! Variable-length `Q1.f` fixed point for weights in `[-1, 1]`.
//!
//! One integer bit, which doubles as the two's-complement sign, and `f`
//! fraction bits. Representable values are `k * 2^-f` for integer
//! `k in [-2^f, 2^f - 1]`, i.e. the range `[-1, 1 - 2^-f]` with uniform step
//! `2^-f`. With `f = 0` the format is the single bit `{-1, 0}`.

use std::fmt;

use crate::error::{Error, Result};
use crate::posit::pow2;

pub const MAX_FRACTION_BITS: u32 = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FixedFormat {
    frac_bits: u32,
}

impl FixedFormat {
    pub fn new(frac_bits: u32) -> Result<Self> {
        if frac_bits > MAX_FRACTION_BITS {
            return Err(Error::Format(format!(
                "fixed-point fraction width {frac_bits} exceeds {MAX_FRACTION_BITS}"
            )));
        }
        Ok(Self { frac_bits })
    }

    /// Format with the given total width `1 + f`.
    pub fn with_total_bits(bits: u32) -> Result<Self> {
        match bits.checked_sub(1) {
            Some(frac_bits) => Self::new(frac_bits),
            None => Err(Error::Format(
                "fixed-point width must be at least 1 bit".into(),
            )),
        }
    }

    pub fn frac_bits(self) -> u32 {
        self.frac_bits
    }

    pub fn total_bits(self) -> u32 {
        self.frac_bits + 1
    }

    pub fn step(self) -> f64 {
        pow2(-(self.frac_bits as i32))
    }

    pub fn min_int(self) -> i32 {
        -(1 << self.frac_bits)
    }

    pub fn max_int(self) -> i32 {
        (1 << self.frac_bits) - 1
    }

    pub fn min_value(self) -> f64 {
        -1.0
    }

    pub fn max_value(self) -> f64 {
        1.0 - self.step()
    }

    /// All codes in ascending order.
    pub fn codes(self) -> impl Iterator<Item = FixedCode> {
        (self.min_int()..=self.max_int()).map(move |value| FixedCode {
            value,
            format: self,
        })
    }
}

impl fmt::Display for FixedFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q1.{}", self.frac_bits)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FixedCode {
    value: i32,
    format: FixedFormat,
}

impl FixedCode {
    /// Code from its signed integer value `k` (the real value is `k * 2^-f`).
    pub fn from_int(value: i32, format: FixedFormat) -> Result<Self> {
        if !(format.min_int()..=format.max_int()).contains(&value) {
            return Err(Error::Format(format!(
                "{value} is not a {format} integer (range [{}, {}])",
                format.min_int(),
                format.max_int()
            )));
        }
        Ok(Self { value, format })
    }

    /// Code from its `1 + f` bit two's-complement pattern.
    pub fn from_bits(bits: u32, format: FixedFormat) -> Result<Self> {
        let width = format.total_bits();
        if bits >> width != 0 {
            return Err(Error::Format(format!(
                "pattern {bits:#x} does not fit in {width} bits"
            )));
        }
        let shift = 32 - width;
        Ok(Self {
            value: ((bits << shift) as i32) >> shift,
            format,
        })
    }

    pub fn to_int(self) -> i32 {
        self.value
    }

    pub fn bits(self) -> u32 {
        (self.value as u32) & (u32::MAX >> (32 - self.format.total_bits()))
    }

    pub fn format(self) -> FixedFormat {
        self.format
    }

    pub fn to_f64(self) -> f64 {
        dequantize_fixed(self)
    }
}

/// Nearest `Q1.f` value to `x`, ties to even, saturating to `[-1, 1 - 2^-f]`.
pub fn quantize_fixed(x: f64, format: FixedFormat) -> Result<FixedCode> {
    if !x.is_finite() {
        return Err(Error::Domain(format!(
            "cannot quantize non-finite value {x} to fixed point"
        )));
    }
    let scaled = (x * pow2(format.frac_bits as i32)).round_ties_even();
    let value = scaled.clamp(f64::from(format.min_int()), f64::from(format.max_int())) as i32;
    Ok(FixedCode { value, format })
}

pub fn dequantize_fixed(code: FixedCode) -> f64 {
    f64::from(code.value) * code.format.step()
}

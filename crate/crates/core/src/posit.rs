//! Posit encode/decode for `P(n, es)` formats with `2 <= n <= 32`, `es <= 3`.
//!
//! A posit bit pattern is laid out MSB-first as
//!
//! ```text
//! [ sign | regime run + terminator | es exponent bits | fraction ]
//! ```
//!
//! and denotes `(-1)^sign * useed^r * 2^exponent * (1 + fraction)` with
//! `useed = 2^(2^es)`. Negative values are stored as the two's complement of
//! the whole pattern, so ordering the patterns as signed `n`-bit integers
//! orders their values. The pattern `1000…0` is NaR; it is never produced by
//! [`encode_posit`] and [`decode_posit`] refuses it.
//!
//! Both directions are exact: decoding assembles the value from integer
//! fields and a power of two, and encoding picks the nearest representable
//! value by comparing against the two bracketing patterns exactly.
//!
//! The normalized variant divides every decoded value by `maxpos`, so each
//! format covers `[-1, 1]` regardless of `n`.

use std::fmt;

use crate::error::{Error, Result};

pub const MAX_BITS: u32 = 32;
pub const MAX_ES: u32 = 3;

/// `2^exp` built from its bit pattern; exact for normal exponents.
pub(crate) fn pow2(exp: i32) -> f64 {
    assert!(
        (-1022..=1023).contains(&exp),
        "2^{exp} is outside the normal f64 range"
    );
    f64::from_bits(((exp + 1023) as u64) << 52)
}

/// `useed = 2^(2^es)`, the base of regime scaling.
pub fn useed(es: u32) -> Result<u64> {
    if es > MAX_ES {
        return Err(Error::Format(format!(
            "es = {es} exceeds the maximum of {MAX_ES}"
        )));
    }
    Ok(1u64 << (1u32 << es))
}

/// Largest positive value of `format`, `useed^(n-2)`.
pub fn maxpos(format: PositFormat) -> f64 {
    format.maxpos()
}

/// Smallest positive value of `format`, `useed^-(n-2)`.
pub fn minpos(format: PositFormat) -> f64 {
    format.minpos()
}

/// The `(n, es)` pair that defines a posit encoding space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PositFormat {
    n: u32,
    es: u32,
}

impl PositFormat {
    pub fn new(n: u32, es: u32) -> Result<Self> {
        if !(2..=MAX_BITS).contains(&n) {
            return Err(Error::Format(format!(
                "posit width n = {n} is outside [2, {MAX_BITS}]"
            )));
        }
        if es > MAX_ES {
            return Err(Error::Format(format!(
                "es = {es} exceeds the maximum of {MAX_ES}"
            )));
        }
        if es > n - 2 {
            return Err(Error::Format(format!(
                "es = {es} leaves no room for sign and regime in {n} bits"
            )));
        }
        Ok(Self { n, es })
    }

    pub fn n(self) -> u32 {
        self.n
    }

    pub fn es(self) -> u32 {
        self.es
    }

    pub fn useed(self) -> u64 {
        1u64 << self.useed_log2()
    }

    /// `log2(useed) = 2^es`.
    pub fn useed_log2(self) -> i32 {
        1 << self.es
    }

    pub fn maxpos(self) -> f64 {
        pow2(self.useed_log2() * (self.n as i32 - 2))
    }

    pub fn minpos(self) -> f64 {
        pow2(-self.useed_log2() * (self.n as i32 - 2))
    }

    pub(crate) fn mask(self) -> u32 {
        u32::MAX >> (32 - self.n)
    }

    fn sign_bit(self) -> u32 {
        1 << (self.n - 1)
    }

    pub fn zero(self) -> PositCode {
        PositCode {
            bits: 0,
            format: self,
        }
    }

    pub fn nar(self) -> PositCode {
        PositCode {
            bits: self.sign_bit(),
            format: self,
        }
    }

    pub fn maxpos_code(self) -> PositCode {
        PositCode {
            bits: self.sign_bit() - 1,
            format: self,
        }
    }

    pub fn minpos_code(self) -> PositCode {
        PositCode {
            bits: 1,
            format: self,
        }
    }

    /// Every pattern except NaR, in ascending value order.
    pub fn codes(self) -> impl Iterator<Item = PositCode> {
        let mask = self.mask();
        let start = self.sign_bit() + 1;
        (0..u64::from(mask)).map(move |i| PositCode {
            bits: (start as u64 + i) as u32 & mask,
            format: self,
        })
    }

    pub fn encode(self, x: f64) -> Result<PositCode> {
        encode_posit(x, self)
    }

    pub fn encode_normalized(self, x: f64) -> Result<PositCode> {
        encode_normalized(x, self)
    }
}

impl fmt::Display for PositFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P({},{})", self.n, self.es)
    }
}

/// An `n`-bit posit pattern held in the low bits of a `u32`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PositCode {
    bits: u32,
    format: PositFormat,
}

impl PositCode {
    pub fn from_bits(bits: u32, format: PositFormat) -> Result<Self> {
        if bits & !format.mask() != 0 {
            return Err(Error::Format(format!(
                "pattern {bits:#x} does not fit in {} bits",
                format.n
            )));
        }
        Ok(Self { bits, format })
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    pub fn format(self) -> PositFormat {
        self.format
    }

    pub fn is_nar(self) -> bool {
        self.bits == self.format.sign_bit()
    }

    pub fn is_zero(self) -> bool {
        self.bits == 0
    }

    pub fn is_negative(self) -> bool {
        self.bits & self.format.sign_bit() != 0 && !self.is_nar()
    }

    /// The pattern read as an `n`-bit two's-complement integer.
    pub fn to_signed(self) -> i32 {
        let shift = 32 - self.format.n;
        ((self.bits << shift) as i32) >> shift
    }

    /// Two's complement of the whole pattern; negates the value.
    pub fn negate(self) -> Self {
        Self {
            bits: self.bits.wrapping_neg() & self.format.mask(),
            format: self.format,
        }
    }

    pub fn decode(self) -> Result<f64> {
        decode_posit(self)
    }

    pub fn decode_normalized(self) -> Result<f64> {
        decode_normalized(self)
    }

    /// Splits the pattern into its fields. Zero has no fields and yields `None`.
    pub fn decompose(self) -> Result<Option<DecodedPosit>> {
        if self.is_nar() {
            return Err(Error::NotAReal { bits: self.bits });
        }
        if self.is_zero() {
            return Ok(None);
        }
        let negative = self.is_negative();
        let magnitude = if negative {
            self.negate().bits
        } else {
            self.bits
        };
        Ok(Some(decompose_magnitude(magnitude, self.format, negative)))
    }
}

impl fmt::Display for PositCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:0width$b}", self.bits, width = self.format.n as usize)
    }
}

/// The fields of a non-zero posit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecodedPosit {
    pub negative: bool,
    /// Regime exponent: `k - 1` for a run of `k` ones, `-k` for a run of `k` zeros.
    pub r_value: i32,
    /// Exponent field, `< 2^es`. Exponent bits cut off by the end of the
    /// pattern count as zeros.
    pub exponent: u32,
    /// Fraction field as an integer and its width in bits.
    pub fraction_bits: u32,
    pub fraction_len: u32,
    es: u32,
}

impl DecodedPosit {
    pub fn sign(&self) -> f64 {
        if self.negative {
            -1.0
        } else {
            1.0
        }
    }

    /// The fraction as a real in `[0, 1)`.
    pub fn fraction(&self) -> f64 {
        f64::from(self.fraction_bits) * pow2(-(self.fraction_len as i32))
    }

    /// Binary scale of the value: `r_value * 2^es + exponent`.
    pub fn scale(&self) -> i32 {
        self.r_value * (1 << self.es) + self.exponent as i32
    }

    pub fn value(&self) -> f64 {
        // (2^len + fraction) * 2^(scale - len); both factors are exact.
        let significand = (1u64 << self.fraction_len) + u64::from(self.fraction_bits);
        self.sign() * significand as f64 * pow2(self.scale() - self.fraction_len as i32)
    }
}

fn decompose_magnitude(bits: u32, format: PositFormat, negative: bool) -> DecodedPosit {
    let width = format.n - 1;
    let body_mask = format.mask() >> 1;
    let body = bits & body_mask;
    let leading_one = (body >> (width - 1)) & 1 == 1;

    // Length of the run of bits equal to the first regime bit.
    let run_source = if leading_one { !body & body_mask } else { body };
    let run = width - (32 - run_source.leading_zeros());
    let r_value = if leading_one {
        run as i32 - 1
    } else {
        -(run as i32)
    };

    let remaining = width.saturating_sub(run + 1);
    let rest = body & low_mask(remaining);
    let (exponent, fraction_bits, fraction_len) = if remaining >= format.es {
        let fraction_len = remaining - format.es;
        (
            rest >> fraction_len,
            rest & low_mask(fraction_len),
            fraction_len,
        )
    } else {
        (rest << (format.es - remaining), 0, 0)
    };

    DecodedPosit {
        negative,
        r_value,
        exponent,
        fraction_bits,
        fraction_len,
        es: format.es,
    }
}

fn low_mask(len: u32) -> u32 {
    if len >= 32 {
        u32::MAX
    } else {
        (1u32 << len) - 1
    }
}

/// Real value of a posit pattern. Zero decodes to `0.0`; NaR is an error.
pub fn decode_posit(code: PositCode) -> Result<f64> {
    Ok(code.decompose()?.map_or(0.0, |d| d.value()))
}

/// Nearest posit to `x`, ties to the even pattern.
///
/// Magnitudes at or above `maxpos` saturate to `±maxpos`; non-zero magnitudes
/// at or below `minpos` round to `±minpos`. Only an exact zero encodes to the
/// zero pattern.
pub fn encode_posit(x: f64, format: PositFormat) -> Result<PositCode> {
    if !x.is_finite() {
        return Err(Error::Domain(format!(
            "cannot encode non-finite value {x} as a posit"
        )));
    }
    if x == 0.0 {
        return Ok(format.zero());
    }
    let magnitude = x.abs();
    let code = if magnitude >= format.maxpos() {
        format.maxpos_code()
    } else if magnitude <= format.minpos() {
        format.minpos_code()
    } else {
        encode_magnitude(magnitude, format)
    };
    Ok(if x < 0.0 { code.negate() } else { code })
}

/// Encodes `minpos < magnitude < maxpos`.
fn encode_magnitude(magnitude: f64, format: PositFormat) -> PositCode {
    let useed = format.useed() as f64;

    // Scale into [1, useed) to find the regime, then into [1, 2) for the exponent.
    let mut y = magnitude;
    let mut r_value = 0i32;
    while y >= useed {
        y /= useed;
        r_value += 1;
    }
    while y < 1.0 {
        y *= useed;
        r_value -= 1;
    }
    let mut exponent = 0u32;
    while y >= 2.0 {
        y /= 2.0;
        exponent += 1;
    }
    // y - 1 is a multiple of 2^-52, so this is exact.
    let fraction = ((y - 1.0) * pow2(52)) as u128;

    let (regime, regime_len) = if r_value >= 0 {
        let ones = r_value as u32 + 1;
        (((1u128 << ones) - 1) << 1, ones + 1)
    } else {
        (1u128, (-r_value) as u32 + 1)
    };
    let body = (((regime << format.es) | u128::from(exponent)) << 52) | fraction;
    let len = regime_len + format.es + 52;

    let width = format.n - 1;
    let cut = len - width;
    let lower = PositCode {
        bits: (body >> cut) as u32,
        format,
    };
    if body & ((1u128 << cut) - 1) == 0 {
        return lower;
    }
    let upper = PositCode {
        bits: lower.bits + 1,
        format,
    };

    // Both neighbours lie strictly inside (0, maxpos], and adjacent posits
    // differ by at most a factor of useed, so the sum below is exact.
    let low = decode_posit(lower).expect("lower neighbour is a real posit");
    let high = decode_posit(upper).expect("upper neighbour is a real posit");
    let twice = 2.0 * magnitude;
    let midpoint_sum = low + high;
    if twice < midpoint_sum {
        lower
    } else if twice > midpoint_sum || lower.bits & 1 == 1 {
        upper
    } else {
        lower
    }
}

/// `decode_posit(code) / maxpos`, a value in `[-1, 1]`.
pub fn decode_normalized(code: PositCode) -> Result<f64> {
    Ok(decode_posit(code)? / code.format.maxpos())
}

/// Nearest normalized posit to `x`; values outside `[-1, 1]` saturate to `±1`.
pub fn encode_normalized(x: f64, format: PositFormat) -> Result<PositCode> {
    if !x.is_finite() {
        return Err(Error::Domain(format!(
            "cannot encode non-finite value {x} as a posit"
        )));
    }
    encode_posit(x.clamp(-1.0, 1.0) * format.maxpos(), format)
}

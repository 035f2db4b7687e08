//! Arbitrary `eXmY` floating-point formats.
//!
//! An `eXmY` value has one sign bit, `X` exponent bits and `Y` explicit mantissa bits,
//! with IEEE-754 style subnormals and an all-ones exponent reserved for infinities.
//! Every format with `X <= 11` and `Y <= 52` embeds exactly into `f64`, so scalars are
//! carried around as `f64` and only the rounding knows about the target format.
//!
//! The second half of the module computes how a standard Gaussian behaves once it is
//! rounded into such a format: tail probabilities, the number of distinct values in a
//! `2^s`-sigma window and the variance of the rounded variable.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RoundingMode {
    /// Round to nearest, ties to even.
    RN,
    /// Round toward zero (truncation).
    RZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FloatFormat {
    exp_bits: u32,
    man_bits: u32,
}

impl FloatFormat {
    pub const FP8_E4M3: FloatFormat = FloatFormat::from_bits_unchecked(4, 3);
    pub const FP8_E5M2: FloatFormat = FloatFormat::from_bits_unchecked(5, 2);
    pub const FP16: FloatFormat = FloatFormat::from_bits_unchecked(5, 10);
    pub const BF16: FloatFormat = FloatFormat::from_bits_unchecked(8, 7);
    pub const TF32: FloatFormat = FloatFormat::from_bits_unchecked(8, 10);
    pub const FP32: FloatFormat = FloatFormat::from_bits_unchecked(8, 23);
    pub const FP64: FloatFormat = FloatFormat::from_bits_unchecked(11, 52);

    /// The six formats tabulated by `fmt-stats` by default.
    pub const TABLE: [FloatFormat; 6] =
        [Self::FP8_E4M3, Self::FP8_E5M2, Self::FP16, Self::BF16, Self::TF32, Self::FP32];

    const fn from_bits_unchecked(exp_bits: u32, man_bits: u32) -> Self {
        FloatFormat { exp_bits, man_bits }
    }

    pub fn new(exp_bits: u32, man_bits: u32) -> Result<Self> {
        if !(2..=11).contains(&exp_bits) {
            return Err(Error::InvalidFormat { exp_bits, man_bits, reason: "exponent bits must be in 2..=11" });
        }
        if man_bits > 52 {
            return Err(Error::InvalidFormat { exp_bits, man_bits, reason: "mantissa bits must be at most 52" });
        }
        Ok(FloatFormat { exp_bits, man_bits })
    }

    pub const fn exp_bits(self) -> u32 {
        self.exp_bits
    }

    pub const fn man_bits(self) -> u32 {
        self.man_bits
    }

    pub const fn bias(self) -> i32 {
        (1 << (self.exp_bits - 1)) - 1
    }

    /// Exponent of the smallest normal binade.
    pub const fn min_exponent(self) -> i32 {
        1 - self.bias()
    }

    /// Exponent of the largest finite binade.
    pub const fn max_exponent(self) -> i32 {
        self.bias()
    }

    /// Largest finite value, `2^emax * (2 - 2^-Y)`.
    pub fn max_value(self) -> f64 {
        exp2i(self.max_exponent()) * (2.0 - exp2i(-(self.man_bits as i32)))
    }

    pub fn min_normal(self) -> f64 {
        exp2i(self.min_exponent())
    }

    /// Smallest positive subnormal, `2^(emin - Y)`.
    pub fn min_subnormal(self) -> f64 {
        exp2i(self.min_exponent() - self.man_bits as i32)
    }

    /// `u_Y = 2^-(Y+1)`.
    pub fn unit_roundoff(self) -> f64 {
        exp2i(-(self.man_bits as i32) - 1)
    }

    /// True when every value of `self` is also a value of `other`.
    pub fn embeds_in(self, other: FloatFormat) -> bool {
        self.man_bits <= other.man_bits
            && self.max_exponent() <= other.max_exponent()
            && self.min_exponent() - self.man_bits as i32 >= other.min_exponent() - other.man_bits as i32
    }

    pub fn round(self, x: f64, mode: RoundingMode) -> f64 {
        round_to(x, self, mode)
    }

    pub fn is_representable(self, x: f64) -> bool {
        x.is_nan() || round_to(x, self, RoundingMode::RZ) == x
    }

    pub fn total_bits(self) -> u32 {
        1 + self.exp_bits + self.man_bits
    }

    /// Rounds `x` (RN) and returns its bit pattern, right-aligned in a `u64`.
    pub fn encode(self, x: f64) -> u64 {
        let y = round_to(x, self, RoundingMode::RN);
        let y_bits = self.exp_bits + self.man_bits;
        let exp_all_ones = (1u64 << self.exp_bits) - 1;
        if y.is_nan() {
            let quiet = if self.man_bits > 0 { 1u64 << (self.man_bits - 1) } else { 0 };
            return (exp_all_ones << self.man_bits) | quiet;
        }
        let sign = (y.is_sign_negative() as u64) << y_bits;
        let a = y.abs();
        if a.is_infinite() {
            return sign | (exp_all_ones << self.man_bits);
        }
        if a == 0.0 {
            return sign;
        }
        let lead = floor_log2(a);
        if lead < self.min_exponent() {
            let k = a / self.min_subnormal();
            return sign | k as u64;
        }
        let frac = a / exp2i(lead) - 1.0;
        let m = (frac * exp2i(self.man_bits as i32)) as u64;
        let e = (lead + self.bias()) as u64;
        sign | (e << self.man_bits) | m
    }

    pub fn decode(self, bits: u64) -> f64 {
        let y_bits = self.exp_bits + self.man_bits;
        let neg = (bits >> y_bits) & 1 == 1;
        let e = (bits >> self.man_bits) & ((1u64 << self.exp_bits) - 1);
        let m = bits & ((1u64 << self.man_bits) - 1);
        let mag = if e == (1u64 << self.exp_bits) - 1 {
            if m == 0 {
                f64::INFINITY
            } else {
                f64::NAN
            }
        } else if e == 0 {
            m as f64 * self.min_subnormal()
        } else {
            let scale = exp2i(e as i32 - self.bias() - self.man_bits as i32);
            ((1u64 << self.man_bits) | m) as f64 * scale
        };
        if neg {
            -mag
        } else {
            mag
        }
    }
}

impl fmt::Display for FloatFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}m{}", self.exp_bits, self.man_bits)
    }
}

impl FromStr for FloatFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let named = match lower.as_str() {
            "fp8" | "fp8_e4m3" | "fp8-e4m3" => Some(Self::FP8_E4M3),
            "fp8_e5m2" | "fp8-e5m2" => Some(Self::FP8_E5M2),
            "fp16" | "half" | "binary16" => Some(Self::FP16),
            "bf16" | "bfloat" | "bfloat16" => Some(Self::BF16),
            "tf32" => Some(Self::TF32),
            "fp32" | "single" | "binary32" => Some(Self::FP32),
            "fp64" | "double" | "binary64" => Some(Self::FP64),
            _ => None,
        };
        if let Some(f) = named {
            return Ok(f);
        }
        let parse = || -> Option<(u32, u32)> {
            let rest = lower.strip_prefix('e')?;
            let (x, y) = rest.split_once('m')?;
            Some((x.parse().ok()?, y.parse().ok()?))
        };
        match parse() {
            Some((x, y)) => FloatFormat::new(x, y),
            None => Err(Error::UnknownFormat(s.to_string())),
        }
    }
}

impl TryFrom<String> for FloatFormat {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FloatFormat> for String {
    fn from(f: FloatFormat) -> String {
        f.to_string()
    }
}

/// Exact `2^e` for any `e` in the `f64` range, subnormal powers included.
pub fn exp2i(e: i32) -> f64 {
    if e > 1023 {
        f64::INFINITY
    } else if e >= -1022 {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else if e >= -1074 {
        f64::from_bits(1u64 << (e + 1074))
    } else {
        0.0
    }
}

/// `floor(log2 |x|)` for finite non-zero `x`.
pub fn floor_log2(x: f64) -> i32 {
    let bits = x.abs().to_bits();
    let biased = (bits >> 52) as i32;
    if biased == 0 {
        let frac = bits & ((1u64 << 52) - 1);
        -1074 + 63 - frac.leading_zeros() as i32
    } else {
        biased - 1023
    }
}

/// The power of two of the binade holding `v`; `exp_of` in the RN error inequality.
pub fn exp_of(v: f64) -> f64 {
    exp2i(floor_log2(v))
}

/// Rounds `x` into `fmt`.
///
/// Subnormals and signed zeros are honoured. Under RN, magnitudes at or beyond
/// `max + ulp/2` become infinite; under RZ they clamp to the largest finite value.
/// NaN and infinities pass through.
pub fn round_to(x: f64, fmt: FloatFormat, mode: RoundingMode) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    let bits = x.to_bits();
    let neg = bits >> 63 != 0;
    let biased = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, lsb_exp) = if biased == 0 { (frac, -1074) } else { (frac | (1u64 << 52), biased - 1075) };
    let lead = lsb_exp + 63 - mant.leading_zeros() as i32;
    let quantum = lead.max(fmt.min_exponent()) - fmt.man_bits as i32;

    let mag = if quantum <= lsb_exp {
        x.abs()
    } else {
        let shift = (quantum - lsb_exp) as u32;
        let q = if shift >= 64 {
            0
        } else {
            let q = mant >> shift;
            let rem = mant & ((1u64 << shift) - 1);
            let half = 1u64 << (shift - 1);
            match mode {
                RoundingMode::RZ => q,
                RoundingMode::RN => {
                    if rem > half || (rem == half && q & 1 == 1) {
                        q + 1
                    } else {
                        q
                    }
                }
            }
        };
        q as f64 * exp2i(quantum)
    };

    let max = fmt.max_value();
    let mag = if mag > max {
        match mode {
            RoundingMode::RN => f64::INFINITY,
            RoundingMode::RZ => max,
        }
    } else {
        mag
    };
    if neg {
        -mag
    } else {
        mag
    }
}

/// Every finite value of `fmt` in ascending order, with a single (positive) zero.
pub fn enumerate_values(fmt: FloatFormat) -> Result<Vec<f64>> {
    if fmt.exp_bits > 8 || fmt.man_bits > 12 {
        return Err(Error::EnumerationTooLarge(fmt.to_string()));
    }
    let positive = positive_values(fmt);
    let mut out = Vec::with_capacity(2 * positive.len() + 1);
    out.extend(positive.iter().rev().map(|v| -v));
    out.push(0.0);
    out.extend_from_slice(&positive);
    Ok(out)
}

fn positive_values(fmt: FloatFormat) -> Vec<f64> {
    let y = fmt.man_bits as i32;
    let per_binade = 1u64 << fmt.man_bits;
    let mut out = Vec::new();
    let h0 = fmt.min_subnormal();
    out.extend((1..per_binade).map(|k| k as f64 * h0));
    for e in fmt.min_exponent()..=fmt.max_exponent() {
        let h = exp2i(e - y);
        out.extend((per_binade..2 * per_binade).map(|k| k as f64 * h));
    }
    out
}

/// Number of finite values `v` with `|v| < 2^s`, zero and subnormals included.
///
/// For `2^s` inside the normal range this is `2 (s + bias) 2^Y - 1`.
pub fn count_in_sigma(fmt: FloatFormat, s: i32) -> u64 {
    let y = fmt.man_bits as i64;
    let per_binade = 1i64 << y;
    let s = s as i64;
    let emin = fmt.min_exponent() as i64;
    let emax = fmt.max_exponent() as i64;
    let positive = if s > emax {
        (per_binade - 1) + (emax - emin + 1) * per_binade
    } else if s > emin {
        (per_binade - 1) + (s - emin) * per_binade
    } else if s - emin + y >= 0 {
        // 2^s sits in (or at the top of) the subnormal range: k * 2^(emin-Y) < 2^s.
        (1i64 << (s - emin + y)) - 1
    } else {
        0
    };
    (2 * positive + 1) as u64
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF, evaluated through `erfc` so both tails keep full relative accuracy.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `P(|g| > t)` for `g ~ N(0, 1)`, i.e. `2 (1 - Phi(t))`.
pub fn two_sided_tail(t: f64) -> f64 {
    libm::erfc(t / SQRT_2)
}

/// `P(|g| < t)`, i.e. `2 (Phi(t) - 1/2)`.
pub fn two_sided_mass(t: f64) -> f64 {
    libm::erf(t / SQRT_2)
}

/// `P(a < g < b)` for `0 <= a <= b` (b may be infinite).
fn interval_mass(a: f64, b: f64) -> f64 {
    if a >= 1.0 {
        0.5 * (libm::erfc(a / SQRT_2) - libm::erfc(b / SQRT_2))
    } else {
        0.5 * (libm::erf(b / SQRT_2) - libm::erf(a / SQRT_2))
    }
}

/// Probability that a standard Gaussian exceeds the largest finite value of `fmt`.
pub fn overflow_probability(fmt: FloatFormat) -> f64 {
    two_sided_tail(fmt.max_value())
}

/// Probability that a standard Gaussian rounds (RN) to zero in `fmt`.
///
/// The threshold is half the smallest subnormal: anything below it flushes to zero.
pub fn underflow_probability(fmt: FloatFormat) -> f64 {
    two_sided_mass(fmt.min_subnormal() / 2.0)
}

/// Probability that a standard Gaussian lands below the normal range of `fmt`.
///
/// Uses the same halved threshold convention as [`underflow_probability`]
/// (`min_normal / 2`), which is the convention the tabulated reference values follow.
pub fn not_normalized_probability(fmt: FloatFormat) -> f64 {
    two_sided_mass(fmt.min_normal() / 2.0)
}

/// Segments longer than this are summed with the midpoint expansion instead of cell by cell.
const EXACT_CELLS: u64 = 1 << 16;
/// Below this magnitude every contribution is under 1e-18 and the expansion is used.
const TINY_BINADE: f64 = 9.5367431640625e-7; // 2^-20
/// Beyond this magnitude the Gaussian mass underflows.
const HUGE: f64 = 40.0;

/// `sum_j v_j^2 P(v_j - h/2 < g < v_j + h/2)` for `v_j = start + j h`, `j < count`.
fn run_second_moment(start: f64, h: f64, count: u64) -> f64 {
    if count == 0 {
        return 0.0;
    }
    let lower = start - 0.5 * h;
    if lower > HUGE {
        return 0.0;
    }
    let upper = lower + count as f64 * h;
    if count <= EXACT_CELLS && upper >= TINY_BINADE {
        return (0..count)
            .map(|j| {
                let v = start + j as f64 * h;
                v * v * interval_mass(v - 0.5 * h, v + 0.5 * h)
            })
            .sum();
    }
    // Midpoint rule on x^2 phi(x) plus the curvature of the cell masses:
    //   int x^2 phi + h^2/12 [P(L,U) - 2 (U phi(U) - L phi(L))] + O(h^4).
    let mass = interval_mass(lower, upper);
    let edge = upper * normal_pdf(upper) - lower * normal_pdf(lower);
    (mass - edge) + h * h / 12.0 * (mass - 2.0 * edge)
}

/// Variance of a standard Gaussian rounded (RN) into `fmt`.
///
/// Each value `v` collects the Gaussian mass of its rounding cell; the cell of the
/// largest finite value extends to infinity. Long runs of equally spaced values are
/// summed with a second-order midpoint expansion whose remainder is `O(h^4)`.
pub fn gaussian_variance(fmt: FloatFormat) -> f64 {
    let y = fmt.man_bits as i32;
    let per_binade = 1u64 << fmt.man_bits;
    let emin = fmt.min_exponent();
    let emax = fmt.max_exponent();

    // Subnormals and the first normal binade share one spacing.
    let h0 = fmt.min_subnormal();
    let mut half = run_second_moment(h0, h0, 2 * per_binade - 1);

    for e in (emin + 1)..=emax {
        let h = exp2i(e - y);
        let v0 = exp2i(e);
        if v0 - h > HUGE {
            break;
        }
        let top = e == emax;
        if fmt.man_bits == 0 && top {
            half += v0 * v0 * interval_mass(v0 - 0.25 * h, f64::INFINITY);
            break;
        }
        // The binade's first value has a neighbour below at half the spacing.
        half += v0 * v0 * interval_mass(v0 - 0.25 * h, v0 + 0.5 * h);
        let run = per_binade - 1 - top as u64;
        half += run_second_moment(v0 + h, h, run);
        if top {
            let vmax = fmt.max_value();
            half += vmax * vmax * interval_mass(vmax - 0.5 * h, f64::INFINITY);
        }
    }
    2.0 * half
}

//! Software model of the Tensor-Core `m16n8k8` multiply-accumulate.
//!
//! The model follows five observable properties of the hardware unit:
//!
//! 1. products of two 11-bit significands are exact;
//! 2. the accumulator keeps 25 significand bits;
//! 3. after every addition the accumulator is truncated toward zero;
//! 4. one instruction accumulates eight products (plus the `C` input);
//! 5. the result is rounded toward zero into `f32`.
//!
//! Within one instruction the accumulation order is fixed: `C` first, then the
//! products by increasing index. The accumulator exponent is unbounded; only the
//! final conversion to `f32` can overflow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floatfmt::{exp2i, round_to, FloatFormat, RoundingMode};
use crate::matrix::Matrix;

/// Significand width of the accumulator, implicit bit included.
pub const ACC_BITS: u32 = 25;
/// Products per instruction.
pub const FRAG_K: usize = 8;
pub const FRAG_M: usize = 16;
pub const FRAG_N: usize = 8;

/// Input precision of the multiply unit. Both have 11-bit significands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FragmentPrecision {
    FP16,
    TF32,
}

impl FragmentPrecision {
    pub fn format(self) -> FloatFormat {
        match self {
            FragmentPrecision::FP16 => FloatFormat::FP16,
            FragmentPrecision::TF32 => FloatFormat::TF32,
        }
    }

    /// Converts an `f32` to the fragment format with RN.
    pub fn to_low(self, x: f32) -> f32 {
        round_to(x as f64, self.format(), RoundingMode::RN) as f32
    }
}

/// A finite `f32` split into sign, odd integer significand and exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Operand {
    pub neg: bool,
    /// Zero, or an odd integer below `2^24`.
    pub mant: u32,
    pub exp: i32,
}

impl Operand {
    /// `None` for infinities and NaN.
    pub fn from_f32(x: f32) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        let bits = x.to_bits();
        let neg = bits >> 31 != 0;
        let biased = ((bits >> 23) & 0xff) as i32;
        let frac = bits & 0x7f_ffff;
        let (m, e) = if biased == 0 { (frac, -149) } else { (frac | 0x80_0000, biased - 150) };
        if m == 0 {
            return Some(Operand { neg, mant: 0, exp: 0 });
        }
        let tz = m.trailing_zeros();
        Some(Operand { neg, mant: m >> tz, exp: e + tz as i32 })
    }

    pub fn value(self) -> f64 {
        let v = self.mant as f64 * exp2i(self.exp);
        if self.neg {
            -v
        } else {
            v
        }
    }
}

/// Sign, integer significand of at most [`ACC_BITS`] bits, and exponent of its last bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EmuAccumulator {
    neg: bool,
    mant: u64,
    exp: i32,
}

fn bit_len(m: u128) -> i32 {
    128 - m.leading_zeros() as i32
}

impl EmuAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn significand(&self) -> u64 {
        self.mant
    }

    pub fn exponent(&self) -> i32 {
        self.exp
    }

    pub fn is_negative(&self) -> bool {
        self.neg
    }

    /// Exact value as `f64` (the accumulator never holds more than 25 bits).
    pub fn value(&self) -> f64 {
        let v = self.mant as f64 * exp2i(self.exp);
        if self.neg {
            -v
        } else {
            v
        }
    }

    /// Adds `(-1)^neg * mant * 2^exp` exactly, then truncates to 25 bits toward zero.
    pub fn add(&mut self, neg: bool, mant: u64, exp: i32) {
        if mant == 0 {
            return;
        }
        if self.mant == 0 {
            *self = Self::truncated(neg, mant as u128, exp);
            return;
        }
        let top_a = self.exp + bit_len(self.mant as u128);
        let top_b = exp + bit_len(mant as u128);
        let top = top_a.max(top_b);
        // Anything more than 100 bits below the larger operand only matters through
        // its sign; it is replaced by a half unit at that level (a sticky bit).
        let w = self.exp.min(exp).max(top - 100);
        let scaled = |m: u64, e: i32| -> u128 {
            if e >= w {
                (m as u128) << (e - w + 1)
            } else {
                let shift = (w - e) as u32;
                let (kept, lost) = if shift >= 64 { (0, m != 0) } else { (m >> shift, m & ((1u64 << shift) - 1) != 0) };
                ((kept as u128) << 1) | lost as u128
            }
        };
        let a = scaled(self.mant, self.exp) as i128;
        let b = scaled(mant, exp) as i128;
        let sum = if self.neg { -a } else { a } + if neg { -b } else { b };
        *self = Self::truncated(sum < 0, sum.unsigned_abs(), w - 1);
    }

    fn truncated(neg: bool, mag: u128, exp: i32) -> Self {
        if mag == 0 {
            return Self::default();
        }
        let drop = (bit_len(mag) - ACC_BITS as i32).max(0);
        let m = (mag >> drop) as u64;
        let tz = m.trailing_zeros();
        EmuAccumulator { neg, mant: m >> tz, exp: exp + drop + tz as i32 }
    }

    pub fn add_operand(&mut self, x: Operand) {
        self.add(x.neg, x.mant as u64, x.exp);
    }

    /// Adds the exact product of two fragment values.
    pub fn add_product(&mut self, x: Operand, y: Operand) {
        self.add(x.neg != y.neg, x.mant as u64 * y.mant as u64, x.exp + y.exp);
    }

    /// Output conversion; `RZ` is the hardware behaviour. Overflow gives `±inf` in both modes.
    pub fn to_f32(&self, mode: RoundingMode) -> f32 {
        let v = self.value();
        if v.abs() > f32::MAX as f64 {
            return if self.neg { f32::NEG_INFINITY } else { f32::INFINITY };
        }
        round_to(v, FloatFormat::FP32, mode) as f32
    }
}

/// Adds `term` to a 25-bit accumulator value `acc` and truncates the exact sum toward zero.
///
/// This is the fast route used by the GEMMs. Both inputs are finite `f64` values with
/// at most 48 significant bits (a product of two `f32`s), so a TwoSum tells whether
/// the `f64` sum is exact; when it is not, the only case where truncating the rounded
/// sum differs from truncating the exact one is handled explicitly.
#[inline]
pub fn add_truncate(acc: f64, term: f64) -> f64 {
    let s = acc + term;
    let bb = s - acc;
    let err = (acc - (s - bb)) + (term - bb);
    let t = truncate_25(s);
    if err != 0.0 && t == s && (err < 0.0) != (s < 0.0) {
        step_toward_zero_25(t)
    } else {
        t
    }
}

/// Keeps the leading 25 significant bits of a normal `f64`, toward zero.
#[inline]
fn truncate_25(x: f64) -> f64 {
    const DROP: u64 = 52 - (ACC_BITS as u64 - 1);
    f64::from_bits(x.to_bits() & !((1u64 << DROP) - 1))
}

/// The next 25-bit value toward zero from a non-zero 25-bit value.
fn step_toward_zero_25(t: f64) -> f64 {
    let m = t.abs();
    let e = crate::floatfmt::floor_log2(m);
    let power_of_two = m == exp2i(e);
    let ulp = exp2i(e - ACC_BITS as i32 + 1 - power_of_two as i32);
    (m - ulp).copysign(t)
}

/// RZ (or RN) conversion of a 25-bit accumulator value to `f32`; overflow gives `±inf`.
#[inline]
fn output_f32(v: f64, out_mode: RoundingMode) -> f32 {
    if v == 0.0 {
        // The integer accumulator has no negative zero.
        return 0.0;
    }
    if v.abs() > f32::MAX as f64 {
        return if v < 0.0 { f32::NEG_INFINITY } else { f32::INFINITY };
    }
    if out_mode == RoundingMode::RZ && v.abs() >= f32::MIN_POSITIVE as f64 {
        // Inside the normal range truncation is a mask on the f64 pattern.
        return f64::from_bits(v.to_bits() & !((1u64 << 29) - 1)) as f32;
    }
    round_to(v, FloatFormat::FP32, out_mode) as f32
}

/// Starting from `c`, accumulates `x[j] * y[j]` in index order and returns the rounded output.
///
/// This is one instruction's worth of work for a single output element. Non-finite
/// operands fall back to `f64` arithmetic so that infinities and NaN propagate.
pub fn dot_chain(c: f32, x: &[f32], y: &[f32], out_mode: RoundingMode) -> f32 {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = c as f64;
    for (&a, &b) in x.iter().zip(y) {
        acc = add_truncate(acc, a as f64 * b as f64);
    }
    if acc.is_finite() && c.is_finite() {
        output_f32(acc, out_mode)
    } else {
        non_finite_fallback(c, x, y)
    }
}

/// [`dot_chain`] computed with the integer [`EmuAccumulator`]; the reference route.
pub fn dot_chain_reference(c: f32, x: &[f32], y: &[f32], out_mode: RoundingMode) -> f32 {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = EmuAccumulator::new();
    match Operand::from_f32(c) {
        Some(op) => acc.add_operand(op),
        None => return non_finite_fallback(c, x, y),
    }
    for (&a, &b) in x.iter().zip(y) {
        match (Operand::from_f32(a), Operand::from_f32(b)) {
            (Some(p), Some(q)) => acc.add_product(p, q),
            _ => return non_finite_fallback(c, x, y),
        }
    }
    acc.to_f32(out_mode)
}

fn non_finite_fallback(c: f32, x: &[f32], y: &[f32]) -> f32 {
    let s: f64 = x.iter().zip(y).map(|(&a, &b)| a as f64 * b as f64).sum();
    (c as f64 + s) as f32
}

/// One emulated instruction on eight-element vectors, with `C = 0`.
pub fn emu_dot8(x: &[f32; 8], y: &[f32; 8], out_mode: RoundingMode) -> f32 {
    dot_chain(0.0, x, y, out_mode)
}

/// `D = A B + C` for a 16x8 `A`, 8x8 `B` and 16x8 `C`, each element via [`dot_chain`] with RZ output.
pub fn emu_mma(a: &Matrix<f32>, b: &Matrix<f32>, c: &Matrix<f32>) -> Result<Matrix<f32>> {
    if a.shape() != (FRAG_M, FRAG_K) || b.shape() != (FRAG_K, FRAG_N) || c.shape() != (FRAG_M, FRAG_N) {
        return Err(Error::shape(
            "emu_mma",
            format!("need 16x8, 8x8, 16x8; got {:?}, {:?}, {:?}", a.shape(), b.shape(), c.shape()),
        ));
    }
    let at = a.transpose();
    Ok(Matrix::from_fn(FRAG_M, FRAG_N, |i, j| dot_chain(c[(i, j)], at.col(i), b.col(j), RoundingMode::RZ)))
}

/// Elementwise left-to-right `f32` sum of equally shaped tiles (RN).
pub fn rn_accumulate(tiles: &[Matrix<f32>]) -> Result<Matrix<f32>> {
    let first = tiles.first().ok_or_else(|| Error::InvalidArgument("rn_accumulate needs at least one tile".into()))?;
    let mut out = first.clone();
    for t in &tiles[1..] {
        out = out.add(t)?;
    }
    Ok(out)
}

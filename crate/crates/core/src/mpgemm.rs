//! Split-precision GEMM on the emulated multiply unit.
//!
//! An `f32` matrix `A` is split into two fragment-precision matrices,
//! `A_low = toLow(A)` and `dA_low = toLow((A - A_low) * 2^11)`, so that
//! `A ~ A_low + dA_low * 2^-11` with only `O(u_F16^2)` left over.
//!
//! * [`shgemm`]: `A_low B + (dA_low B) * 2^-11` for an `f32` `A` and a half-precision `B`.
//! * [`tcec_sgemm`]: both operands split, `A_low B_low + (dA_low B_low + A_low dB_low) * 2^-11`.
//! * [`lowprec_gemm`]: both operands converted, no correction.
//!
//! The leading term accumulates its eight-product blocks in `f32` with RN; the
//! correction terms stay in the unit's truncating chain.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floatfmt::{round_to, FloatFormat, RoundingMode};
use crate::matrix::{Matrix, Real};
use crate::tcemu::{dot_chain, FragmentPrecision, FRAG_K};

/// Scale applied to the low-order part of a split, `2^11`.
pub const RESIDUAL_SCALE: f32 = 2048.0;
/// `u_F16 = 2^-11`.
pub const U_F16: f64 = 1.0 / 2048.0;

/// How the `f32` outputs of successive eight-product blocks are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Accumulation {
    /// Each block's output is fed back as the `C` input of the next block.
    RzChain,
    /// Each block starts from zero; outputs are summed in `f32` with RN.
    RnOuter,
}

/// `sum_t A_t B_t` on the emulated unit.
///
/// The k dimension is walked in blocks of eight; within a block the terms are
/// issued in order. A trailing partial block behaves as if zero-padded.
pub fn tc_gemm(terms: &[(&Matrix<f32>, &Matrix<f32>)], acc: Accumulation) -> Result<Matrix<f32>> {
    let (m, k) = terms
        .first()
        .map(|(a, _)| a.shape())
        .ok_or_else(|| Error::InvalidArgument("tc_gemm needs at least one term".into()))?;
    let n = terms[0].1.cols();
    for (a, b) in terms {
        if a.shape() != (m, k) || b.shape() != (k, n) {
            return Err(Error::shape(
                "tc_gemm",
                format!("term {:?} x {:?}, expected {m}x{k} x {k}x{n}", a.shape(), b.shape()),
            ));
        }
    }
    // A row-major, B column-major, so each block is a contiguous run of eight.
    let packed: Vec<(Matrix<f32>, &Matrix<f32>)> = terms.iter().map(|(a, b)| (a.transpose(), *b)).collect();

    let mut out = Matrix::<f32>::zeros(m, n);
    if m == 0 {
        return Ok(out);
    }
    out.as_mut_slice().par_chunks_mut(m).enumerate().for_each(|(j, col)| {
        for (i, c) in col.iter_mut().enumerate() {
            let mut total = 0.0f32;
            let mut l0 = 0;
            while l0 < k {
                let l1 = (l0 + FRAG_K).min(k);
                let start = match acc {
                    Accumulation::RzChain => total,
                    Accumulation::RnOuter => 0.0,
                };
                let mut block = start;
                for (ap, bp) in &packed {
                    block = dot_chain(block, &ap.col(i)[l0..l1], &bp.col(j)[l0..l1], RoundingMode::RZ);
                }
                total = match acc {
                    Accumulation::RzChain => block,
                    Accumulation::RnOuter => total + block,
                };
                l0 = l1;
            }
            *c = total;
        }
    });
    Ok(out)
}

/// The two-part split of an `f32` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub low: Matrix<f32>,
    /// Already multiplied by `2^11`.
    pub delta_low: Matrix<f32>,
    pub target: FragmentPrecision,
}

impl SplitPair {
    /// Elements whose high part overflowed the fragment format.
    pub fn non_finite_count(&self) -> usize {
        self.low.count_non_finite()
    }

    /// `low + delta_low * 2^-11`, exactly, in `f64`.
    pub fn reconstruct(&self) -> Matrix<f64> {
        let mut out = self.low.to_f64();
        for (o, &d) in out.as_mut_slice().iter_mut().zip(self.delta_low.as_slice()) {
            *o += d as f64 * U_F16;
        }
        out
    }
}

/// Elementwise RN conversion to the fragment format.
pub fn to_low(a: &Matrix<f32>, target: FragmentPrecision) -> Matrix<f32> {
    a.map(|x| target.to_low(x))
}

/// Splits `a` into high and scaled low parts. Overflow of the high part is kept as `±inf`.
pub fn split(a: &Matrix<f32>, target: FragmentPrecision) -> SplitPair {
    let fmt = target.format();
    let low = to_low(a, target);
    let mut delta = Matrix::<f32>::zeros(a.rows(), a.cols());
    for ((d, &x), &h) in delta.as_mut_slice().iter_mut().zip(a.as_slice()).zip(low.as_slice()) {
        let r = (x as f64 - h as f64) * RESIDUAL_SCALE as f64;
        *d = round_to(r, fmt, RoundingMode::RN) as f32;
    }
    SplitPair { low, delta_low: delta, target }
}

fn combine(main: &Matrix<f32>, corr: &Matrix<f32>) -> Matrix<f32> {
    let mut out = main.clone();
    for (o, &c) in out.as_mut_slice().iter_mut().zip(corr.as_slice()) {
        *o += c / RESIDUAL_SCALE;
    }
    out
}

fn check_inner(a: &Matrix<f32>, b: &Matrix<f32>, op: &'static str) -> Result<()> {
    if a.cols() != b.rows() {
        return Err(Error::shape(op, format!("{:?} x {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// `A B` for an `f32` `A` and a half-precision `B`, dropping the `A dB` term.
///
/// `B` must hold FP16 values; with `tc = TF32` they are widened, which is exact.
/// Non-finite outputs are returned as is (see [`Matrix::count_non_finite`]).
pub fn shgemm(a: &Matrix<f32>, b: &Matrix<f32>, tc: FragmentPrecision) -> Result<Matrix<f32>> {
    shgemm_with(a, b, tc, Accumulation::RnOuter)
}

/// [`shgemm`] with a chosen accumulation for the leading term; `RzChain` drops the RN rescue.
pub fn shgemm_with(
    a: &Matrix<f32>,
    b: &Matrix<f32>,
    tc: FragmentPrecision,
    leading: Accumulation,
) -> Result<Matrix<f32>> {
    check_inner(a, b, "shgemm")?;
    if let Some(x) = b.as_slice().iter().find(|&&x| !FloatFormat::FP16.is_representable(x as f64)) {
        return Err(Error::InvalidArgument(format!("shgemm: B must be FP16-valued, found {x:e}")));
    }
    let sa = split(a, tc);
    let main = tc_gemm(&[(&sa.low, b)], leading)?;
    let corr = tc_gemm(&[(&sa.delta_low, b)], Accumulation::RzChain)?;
    Ok(combine(&main, &corr))
}

/// Error-corrected single-precision GEMM with both operands split.
pub fn tcec_sgemm(a: &Matrix<f32>, b: &Matrix<f32>, tc: FragmentPrecision) -> Result<Matrix<f32>> {
    check_inner(a, b, "tcec_sgemm")?;
    let sa = split(a, tc);
    let sb = split(b, tc);
    let main = tc_gemm(&[(&sa.low, &sb.low)], Accumulation::RnOuter)?;
    let corr = tc_gemm(&[(&sa.delta_low, &sb.low), (&sa.low, &sb.delta_low)], Accumulation::RzChain)?;
    Ok(combine(&main, &corr))
}

/// Both operands converted to the fragment format, no correction, truncating chain.
pub fn lowprec_gemm(a: &Matrix<f32>, b: &Matrix<f32>, tc: FragmentPrecision) -> Result<Matrix<f32>> {
    check_inner(a, b, "lowprec_gemm")?;
    tc_gemm(&[(&to_low(a, tc), &to_low(b, tc))], Accumulation::RzChain)
}

/// Plain GEMM entirely in `T` with RN.
pub fn gemm_ref<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    a.matmul(b)
}

/// The `f64` oracle for `f32` inputs.
pub fn gemm_f64(a: &Matrix<f32>, b: &Matrix<f32>) -> Result<Matrix<f64>> {
    a.to_f64().matmul(&b.to_f64())
}

/// `||C_test - C_ref||_F / ||C_ref||_F` in `f64`.
pub fn relative_error<T: Real>(test: &Matrix<T>, reference: &Matrix<f64>) -> Result<f64> {
    if test.shape() != reference.shape() {
        return Err(Error::shape("relative_error", format!("{:?} vs {:?}", test.shape(), reference.shape())));
    }
    let den = reference.frobenius_norm();
    if den == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let num: f64 = test
        .as_slice()
        .iter()
        .zip(reference.as_slice())
        .map(|(&t, &r)| {
            let d = t.f64() - r;
            d * d
        })
        .sum();
    Ok(num.sqrt() / den)
}

/// `|A| |B|` in `f64`, the scale of the elementwise error bounds.
pub fn abs_product(a: &Matrix<f32>, b: &Matrix<f32>) -> Result<Matrix<f64>> {
    a.to_f64().map(f64::abs).matmul(&b.to_f64().map(f64::abs))
}

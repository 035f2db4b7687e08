//! Seeded random matrices.
//!
//! Every column draws from its own ChaCha8 stream keyed by `(seed, column)`, so the
//! output depends only on the seed and the shape, never on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::floatfmt::{round_to, FloatFormat, RoundingMode};
use crate::matrix::{Matrix, Real};

fn column_rng(seed: u64, col: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(col as u64);
    rng
}

fn fill_columns<T: Real>(rows: usize, cols: usize, seed: u64, draw: impl Fn(&mut ChaCha8Rng) -> T + Sync) -> Matrix<T> {
    let mut out = Matrix::zeros(rows, cols);
    if rows > 0 {
        out.as_mut_slice().par_chunks_mut(rows).enumerate().for_each(|(j, col)| {
            let mut rng = column_rng(seed, j);
            for v in col {
                *v = draw(&mut rng);
            }
        });
    }
    out
}

/// Standard normal entries drawn in `f32`, then rounded (RN) into `fmt`.
pub fn gaussian_matrix(rows: usize, cols: usize, fmt: FloatFormat, seed: u64) -> Matrix<f32> {
    fill_columns(rows, cols, seed, |rng| {
        let g: f32 = StandardNormal.sample(rng);
        round_to(g as f64, fmt, RoundingMode::RN) as f32
    })
}

/// Standard normal entries in `f64` (for orthogonal factors and oracles).
pub fn gaussian_matrix_f64(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
    fill_columns(rows, cols, seed, |rng| StandardNormal.sample(rng))
}

/// Entries uniform in `[lo, hi)`.
pub fn uniform_matrix<T: Real>(rows: usize, cols: usize, lo: f64, hi: f64, seed: u64) -> Matrix<T> {
    let dist = Uniform::new(lo, hi).expect("lo < hi");
    fill_columns(rows, cols, seed, move |rng| T::of(rng.sample(dist)))
}

/// Entries `+1` and `-1` with probability `1/(2s)` each, otherwise `0`; no `sqrt(s)` scale.
pub fn sparse_sign_matrix(rows: usize, cols: usize, s: f64, seed: u64) -> Result<Matrix<f32>> {
    if !(s >= 1.0) {
        return Err(Error::InvalidArgument(format!("sparsity must be at least 1, got {s}")));
    }
    let half = 0.5 / s;
    Ok(fill_columns(rows, cols, seed, move |rng| {
        let u: f64 = rng.random();
        if u < half {
            1.0
        } else if u < 2.0 * half {
            -1.0
        } else {
            0.0
        }
    }))
}

/// Mixes a base seed with a tag (SplitMix64 finaliser), for independent sub-streams.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

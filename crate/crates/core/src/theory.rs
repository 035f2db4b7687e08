//! Monte-Carlo checks of the expectations behind the projection error bound when
//! the Gaussian random matrix is stored in a low-precision format.
//!
//! For `G` with i.i.d. entries of variance `alpha` (a rounded standard normal has
//! `alpha = gaussian_variance(fmt)`):
//!
//! * `E ||S G T||_F^2 = alpha ||S||_F^2 ||T||_F^2`
//! * `E ||G^+||_F^2 = k / (p - 1) / alpha` for `G: k x (k + p)`

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::floatfmt::{gaussian_variance, FloatFormat};
use crate::matrix::Matrix;
use crate::randgen::{derive_seed, gaussian_matrix};

/// Sample mean, its standard error, and the value theory predicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub expected: f64,
    pub draws: usize,
}

impl McEstimate {
    fn from_samples(samples: &[f64], expected: f64) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        McEstimate { mean, std_error: (var / n).sqrt(), expected, draws: samples.len() }
    }

    /// `|mean - expected|` in standard errors.
    pub fn z_score(&self) -> f64 {
        (self.mean - self.expected).abs() / self.std_error
    }
}

/// `||S G T||_F^2` in `f64`.
pub fn sgt_norm_sq(s: &Matrix<f64>, g: &Matrix<f32>, t: &Matrix<f64>) -> Result<f64> {
    let m = s.matmul(&g.to_f64())?.matmul(t)?;
    Ok(m.frobenius_norm().powi(2))
}

/// `||G^+||_F^2 = tr((G G^T)^-1)` for a wide, full-row-rank `G`, via Cholesky in `f64`.
pub fn pinv_frobenius_sq(g: &Matrix<f32>) -> Result<f64> {
    let g = g.to_f64();
    let k = g.rows();
    if k > g.cols() {
        return Err(Error::shape("pinv_frobenius_sq", format!("need rows <= cols, got {:?}", g.shape())));
    }
    let gram = g.matmul(&g.transpose())?;
    // Lower Cholesky factor, row by row.
    let mut l = Matrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let mut sum = gram[(i, j)];
            for p in 0..j {
                sum -= l[(i, p)] * l[(j, p)];
            }
            if i == j {
                if !(sum > 0.0) {
                    return Err(Error::InvalidArgument("G G^T is not positive definite".into()));
                }
                l.col_mut(j)[i] = sum.sqrt();
            } else {
                l.col_mut(j)[i] = sum / l[(j, j)];
            }
        }
    }
    // tr(M^-1) = ||L^-1||_F^2, with L^-1 by forward substitution on each unit vector.
    let mut total = 0.0;
    for c in 0..k {
        let mut x = vec![0.0; k];
        for i in c..k {
            let mut sum = if i == c { 1.0 } else { 0.0 };
            for p in c..i {
                sum -= l[(i, p)] * x[p];
            }
            x[i] = sum / l[(i, i)];
        }
        total += x.iter().map(|v| v * v).sum::<f64>();
    }
    Ok(total)
}

/// Estimates `E ||S G T||_F^2` for `G: k x k` rounded into `fmt`, with fixed `S: 3 x k`, `T: k x 2`.
pub fn check_sgt(fmt: FloatFormat, k: usize, draws: usize, seed: u64) -> Result<McEstimate> {
    let s = Matrix::<f64>::from_fn(3, k, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.5);
    let t = Matrix::<f64>::from_fn(k, 2, |i, j| ((i + 2 * j) % 4) as f64 * 0.5 - 0.25);
    let expected = gaussian_variance(fmt) * s.frobenius_norm().powi(2) * t.frobenius_norm().powi(2);
    let samples: Vec<f64> = (0..draws)
        .into_par_iter()
        .map(|d| sgt_norm_sq(&s, &gaussian_matrix(k, k, fmt, derive_seed(seed, d as u64)), &t))
        .collect::<Result<_>>()?;
    Ok(McEstimate::from_samples(&samples, expected))
}

/// Estimates `E ||G^+||_F^2` for `G: k x (k + p)` rounded into `fmt`; needs `p >= 2`.
pub fn check_pinv(fmt: FloatFormat, k: usize, p: usize, draws: usize, seed: u64) -> Result<McEstimate> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!("p must be at least 2, got {p}")));
    }
    let expected = k as f64 / (p as f64 - 1.0) / gaussian_variance(fmt);
    let samples: Vec<f64> = (0..draws)
        .into_par_iter()
        .map(|d| pinv_frobenius_sq(&gaussian_matrix(k, k + p, fmt, derive_seed(seed, d as u64))))
        .collect::<Result<_>>()?;
    Ok(McEstimate::from_samples(&samples, expected))
}

//! Input generators with known spectra.
//!
//! Matrices are assembled in `f64` and rounded to `f32` once at the end. Orthogonal
//! factors are Haar distributed (sign-fixed QR of a Gaussian matrix).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{qr, Tensor};
use crate::matrix::Matrix;
use crate::randgen::{derive_seed, gaussian_matrix_f64, uniform_matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectrumKind {
    /// `s_i = max(1 - a_l i, s_p)`, `a_l = (1 - s_p) / p`.
    Linear,
    /// `s_i = 2^(-a_e i)`, `a_e = log2(1 / s_p) / p`.
    Exp,
}

/// Singular values `s_0 >= s_1 >= ... >= s_{n-1}`, with `s_p` the value reached at index `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSpec {
    pub kind: SpectrumKind,
    pub s_p: f64,
    pub n: usize,
    pub rank: usize,
}

impl SpectrumSpec {
    pub fn new(kind: SpectrumKind, s_p: f64, n: usize, rank: usize) -> Result<Self> {
        if !(s_p > 0.0 && s_p < 1.0) {
            return Err(Error::InvalidArgument(format!("s_p must lie in (0, 1), got {s_p}")));
        }
        if rank == 0 || rank >= n {
            return Err(Error::InvalidArgument(format!("rank {rank} must be in 1..{n}")));
        }
        Ok(SpectrumSpec { kind, s_p, n, rank })
    }

    fn decay(&self) -> f64 {
        match self.kind {
            SpectrumKind::Linear => (1.0 - self.s_p) / self.rank as f64,
            SpectrumKind::Exp => (1.0 / self.s_p).log2() / self.rank as f64,
        }
    }

    /// The sequence, rounded to `f32` values.
    pub fn singular_values(&self) -> Vec<f64> {
        let a = self.decay();
        (0..self.n)
            .map(|i| {
                let s = match self.kind {
                    SpectrumKind::Linear => (1.0 - a * i as f64).max(self.s_p),
                    SpectrumKind::Exp => (-a * i as f64).exp2(),
                };
                s as f32 as f64
            })
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.singular_values().iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    /// `||Sigma_2||_F`, the best possible rank-`p` error, by direct summation.
    pub fn tail_norm(&self) -> f64 {
        self.singular_values()[self.rank..].iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    /// The same quantity from the closed forms (exact real arithmetic, no `f32` rounding).
    ///
    /// Linear: `s_p sqrt(N - p)`. Exp: `sqrt((s_p^2 - 2^(2qN)) / (1 - 2^(2q)))` with `q = -a_e`.
    pub fn tail_norm_closed_form(&self) -> f64 {
        let (n, p) = (self.n as f64, self.rank as f64);
        match self.kind {
            SpectrumKind::Linear => self.s_p * (n - p).sqrt(),
            SpectrumKind::Exp => {
                let q = -self.decay();
                ((self.s_p * self.s_p - (2.0 * q * n).exp2()) / (1.0 - (2.0 * q).exp2())).sqrt()
            }
        }
    }

    /// Relative Eckart-Young floor `||Sigma_2||_F / ||A||_F`.
    pub fn relative_floor(&self) -> f64 {
        self.tail_norm() / self.frobenius_norm()
    }
}

/// Haar-distributed `n x n` orthogonal matrix.
pub fn haar_orthogonal(n: usize, seed: u64) -> Matrix<f64> {
    let g = gaussian_matrix_f64(n, n, seed);
    qr(&g).expect("a Gaussian matrix is finite").0
}

/// `U diag(s) V^T` with independent Haar `U` and `V`, in `f64`.
pub fn matrix_from_singular_values(s: &[f64], seed: u64) -> Matrix<f64> {
    let n = s.len();
    let u = haar_orthogonal(n, derive_seed(seed, 0));
    let v = haar_orthogonal(n, derive_seed(seed, 1));
    let mut us = u;
    for (j, &sj) in s.iter().enumerate() {
        for x in us.col_mut(j) {
            *x *= sj;
        }
    }
    us.matmul(&v.transpose()).expect("square factors")
}

/// `N x N` `f32` matrix with the spectrum of `spec`.
pub fn matrix_with_spectrum(spec: &SpectrumSpec, seed: u64) -> Matrix<f32> {
    matrix_from_singular_values(&spec.singular_values(), seed).to_f32()
}

/// `D + xi G G^T` with `D = diag(I_r, 0)` and `G` an `n x n` Gaussian.
pub fn matrix_type1(n: usize, r: usize, xi: f64, seed: u64) -> Matrix<f32> {
    let mut a = if xi == 0.0 {
        Matrix::<f64>::zeros(n, n)
    } else {
        let g = gaussian_matrix_f64(n, n, seed);
        g.matmul(&g.transpose()).expect("square").scale(xi)
    };
    for i in 0..r.min(n) {
        a[(i, i)] += 1.0;
    }
    a.to_f32()
}

/// The singular values of [`matrix_type2`]: `phi` repeated `r` times, then `2^-alpha, ..., (n-r+1)^-alpha`.
pub fn poly_singular_values(n: usize, r: usize, alpha: f64, phi: f64) -> Vec<f64> {
    (0..n).map(|i| if i < r { phi } else { ((i - r + 2) as f64).powf(-alpha) }).collect()
}

/// `U D V^T` with Haar factors and polynomially decaying `D`.
pub fn matrix_type2(n: usize, r: usize, alpha: f64, phi: f64, seed: u64) -> Matrix<f32> {
    matrix_from_singular_values(&poly_singular_values(n, r, alpha, phi), seed).to_f32()
}

/// Alias used for the RSVD study.
pub fn a_poly(n: usize, r: usize, alpha: f64, phi: f64, seed: u64) -> Matrix<f32> {
    matrix_type2(n, r, alpha, phi, seed)
}

/// `1 / (|x_i - y_j| + gamma)`, in `f64`.
pub fn cauchy_raw(x: &[f64], y: &[f64], gamma: f64) -> Matrix<f64> {
    Matrix::from_fn(x.len(), y.len(), |i, j| 1.0 / ((x[i] - y[j]).abs() + gamma))
}

/// One step of orthogonal iteration, `A <- A (A^T A)`.
///
/// This is where the dynamic range grows: for `n = 512` and `gamma = 1e-3` the entries
/// move from about `1e3` to about `1e13`, past the FP16 range but well inside `f32`.
pub fn orthogonal_iteration_step(a: &Matrix<f64>) -> Matrix<f64> {
    let gram = a.t_matmul(a).expect("square");
    a.matmul(&gram).expect("square")
}

/// Cauchy test matrix with `x, y` uniform in `(-1e-3, 1e-3)`, after one iteration step.
pub fn cauchy_matrix(n: usize, gamma: f64, seed: u64) -> Result<Matrix<f32>> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let xs = uniform_matrix::<f64>(n, 1, -1e-3, 1e-3, derive_seed(seed, 0)).into_vec();
    let ys = uniform_matrix::<f64>(n, 1, -1e-3, 1e-3, derive_seed(seed, 1)).into_vec();
    Ok(orthogonal_iteration_step(&cauchy_raw(&xs, &ys, gamma)).to_f32())
}

/// Tensor with multilinear rank at most `J_i - padding`, built by contracting a random
/// core with rank-deficient random factors.
pub fn hosvd_test_tensor(dims: &[usize], ranks: &[usize], padding: usize, seed: u64) -> Result<Tensor<f32>> {
    if dims.len() != ranks.len() || dims.is_empty() {
        return Err(Error::shape("hosvd_test_tensor", format!("dims {dims:?} vs ranks {ranks:?}")));
    }
    if ranks.iter().any(|&j| j <= padding) {
        return Err(Error::InvalidArgument(format!("padding {padding} must be below every rank in {ranks:?}")));
    }
    let core_len: usize = ranks.iter().product();
    let core = uniform_matrix::<f64>(core_len, 1, -1.0, 1.0, derive_seed(seed, 0)).into_vec();
    let mut g = Tensor::new(ranks.to_vec(), core)?;
    for (mode, (&i_dim, &j)) in dims.iter().zip(ranks).enumerate() {
        let k = j - padding;
        let tag = 1 + 2 * mode as u64;
        let alpha = uniform_matrix::<f64>(j, k, -1.0, 1.0, derive_seed(seed, tag));
        let beta = uniform_matrix::<f64>(k, i_dim, -1.0, 1.0, derive_seed(seed, tag + 1));
        g = g.mode_contract(&alpha.matmul(&beta)?, mode)?;
    }
    Ok(g.cast())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms_match_summation() {
        for (kind, s_p) in [(SpectrumKind::Linear, 0.1), (SpectrumKind::Exp, 1e-3)] {
            let spec = SpectrumSpec::new(kind, s_p, 256, 16).unwrap();
            let direct = spec.tail_norm();
            let closed = spec.tail_norm_closed_form();
            assert!((direct / closed - 1.0).abs() < 1e-6, "{kind:?}: {direct} vs {closed}");
            let s = spec.singular_values();
            assert_eq!(s[0], 1.0);
            assert!((s[16] / s_p - 1.0).abs() < 1e-6);
            assert!(s.windows(2).all(|w| w[0] >= w[1]));
        }
        assert!(SpectrumSpec::new(SpectrumKind::Exp, 1.5, 10, 2).is_err());
    }

    #[test]
    fn haar_is_orthogonal() {
        let q = haar_orthogonal(20, 3);
        assert!(q.orthonormality_defect() < 1e-13);
    }

    #[test]
    fn type1_without_noise_is_projector() {
        let a = matrix_type1(6, 2, 0.0, 1);
        let want = Matrix::<f32>::from_fn(6, 6, |i, j| if i == j && i < 2 { 1.0 } else { 0.0 });
        assert_eq!(a, want);
    }

    #[test]
    fn cauchy_entries() {
        let x = [0.0, 5e-4, -5e-4];
        let a = cauchy_raw(&x, &x, 1e-3);
        for i in 0..3 {
            assert!((a[(i, i)] - 1000.0).abs() < 1e-9);
            for j in 0..3 {
                assert_eq!(a[(i, j)], a[(j, i)]);
            }
        }
        assert!(cauchy_matrix(4, 0.0, 1).is_err());
    }

    #[test]
    fn poly_values() {
        let s = poly_singular_values(6, 2, 3.0, 1e6);
        assert_eq!(s, vec![1e6, 1e6, 0.125, 1.0 / 27.0, 1.0 / 64.0, 1.0 / 125.0]);
    }
}

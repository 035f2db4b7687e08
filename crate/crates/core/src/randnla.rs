//! Randomized SVD and random-projection HOSVD.
//!
//! Only the sketch `Y = A Omega` goes through the selectable GEMM backend. The
//! remaining products (`Q^T A`, the HOSVD core) use the plain `f32` GEMM, and all
//! residuals are measured in `f64`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floatfmt::FloatFormat;
use crate::linalg::{power_scheme, qr, svd_small, Tensor};
use crate::matrix::{Matrix, Real};
use crate::mpgemm::{gemm_ref, lowprec_gemm, shgemm, tcec_sgemm};
use crate::randgen::{derive_seed, gaussian_matrix, sparse_sign_matrix};
use crate::tcemu::FragmentPrecision;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Backend {
    /// Plain `f32` GEMM.
    Ref32,
    TcecFp16,
    TcecTf32,
    ShgemmFp16,
    ShgemmTf32,
    /// Both operands truncated to TF32, no correction.
    LowprecDirect,
}

impl Backend {
    pub const ALL: [Backend; 6] = [
        Backend::Ref32,
        Backend::TcecFp16,
        Backend::TcecTf32,
        Backend::ShgemmFp16,
        Backend::ShgemmTf32,
        Backend::LowprecDirect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Backend::Ref32 => "ref32",
            Backend::TcecFp16 => "tcec_fp16",
            Backend::TcecTf32 => "tcec_tf32",
            Backend::ShgemmFp16 => "shgemm_fp16",
            Backend::ShgemmTf32 => "shgemm_tf32",
            Backend::LowprecDirect => "lowprec_direct",
        }
    }

    pub fn is_shgemm(self) -> bool {
        matches!(self, Backend::ShgemmFp16 | Backend::ShgemmTf32)
    }

    /// `a * b` on this backend. SHGEMM backends need an FP16-valued `b`.
    pub fn multiply(self, a: &Matrix<f32>, b: &Matrix<f32>) -> Result<Matrix<f32>> {
        match self {
            Backend::Ref32 => gemm_ref(a, b),
            Backend::TcecFp16 => tcec_sgemm(a, b, FragmentPrecision::FP16),
            Backend::TcecTf32 => tcec_sgemm(a, b, FragmentPrecision::TF32),
            Backend::ShgemmFp16 => shgemm(a, b, FragmentPrecision::FP16),
            Backend::ShgemmTf32 => shgemm(a, b, FragmentPrecision::TF32),
            Backend::LowprecDirect => lowprec_gemm(a, b, FragmentPrecision::TF32),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Backend::ALL
            .into_iter()
            .find(|b| b.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown backend `{s}`")))
    }
}

impl TryFrom<String> for Backend {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Backend> for String {
    fn from(b: Backend) -> String {
        b.name().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OmegaKind {
    /// Standard normal entries rounded into `omega_format`.
    Gaussian,
    /// Entries in `{-1, 0, 1}`, non-zero with probability `1/s`.
    SparseSign { s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    pub backend: Backend,
    pub omega_format: FloatFormat,
    pub omega_kind: OmegaKind,
    /// Extra sketch columns beyond the target rank.
    pub oversampling: usize,
    /// Power-scheme exponent `q`.
    pub power: u32,
    pub seed: u64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            backend: Backend::Ref32,
            omega_format: FloatFormat::FP32,
            omega_kind: OmegaKind::Gaussian,
            oversampling: 10,
            power: 0,
            seed: 0,
        }
    }
}

impl ProjectionConfig {
    pub fn with_backend(backend: Backend) -> Self {
        let omega_format = if backend.is_shgemm() { FloatFormat::FP16 } else { FloatFormat::FP32 };
        ProjectionConfig { backend, omega_format, ..Default::default() }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.oversampling < 2 {
            return Err(Error::InvalidArgument(format!("oversampling must be at least 2, got {}", self.oversampling)));
        }
        if self.backend.is_shgemm() && self.omega_kind == OmegaKind::Gaussian && self.omega_format != FloatFormat::FP16
        {
            return Err(Error::InvalidArgument(format!(
                "{} needs an FP16 random matrix, got {}",
                self.backend, self.omega_format
            )));
        }
        if let OmegaKind::SparseSign { s } = self.omega_kind {
            if !(s >= 1.0) {
                return Err(Error::InvalidArgument(format!("sparsity must be at least 1, got {s}")));
            }
        }
        Ok(())
    }

    /// The random matrix this configuration draws, `rows x cols`.
    pub fn omega(&self, rows: usize, cols: usize, seed: u64) -> Result<Matrix<f32>> {
        match self.omega_kind {
            OmegaKind::Gaussian => Ok(gaussian_matrix(rows, cols, self.omega_format, seed)),
            OmegaKind::SparseSign { s } => sparse_sign_matrix(rows, cols, s, seed),
        }
    }
}

/// A sketch and the number of non-finite entries it contains (non-zero means failure).
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub y: Matrix<f32>,
    pub non_finite: usize,
}

impl Projection {
    pub fn failed(&self) -> bool {
        self.non_finite > 0
    }

    fn into_checked(self, context: &'static str) -> Result<Matrix<f32>> {
        match self.non_finite {
            0 => Ok(self.y),
            count => Err(Error::NonFinite { context, count }),
        }
    }
}

/// `Y = A Omega` with a caller-supplied `Omega`.
pub fn project_with(a: &Matrix<f32>, omega: &Matrix<f32>, backend: Backend) -> Result<Projection> {
    let y = backend.multiply(a, omega)?;
    let non_finite = y.count_non_finite();
    Ok(Projection { y, non_finite })
}

/// `Y = (A A^T)^q A Omega` with an `n x p_hat` random `Omega` drawn from `cfg`.
pub fn random_project(a: &Matrix<f32>, cfg: &ProjectionConfig, p_hat: usize) -> Result<Projection> {
    cfg.validate()?;
    let (m, n) = a.shape();
    if p_hat == 0 || p_hat > m.min(n) {
        return Err(Error::InvalidArgument(format!("sketch width {p_hat} must be in 1..={}", m.min(n))));
    }
    sketch(a, cfg, p_hat, cfg.seed)
}

fn sketch(a: &Matrix<f32>, cfg: &ProjectionConfig, cols: usize, seed: u64) -> Result<Projection> {
    let omega = cfg.omega(a.cols(), cols, seed)?;
    let powered;
    let source = if cfg.power > 0 {
        powered = power_scheme(a, cfg.power)?;
        &powered
    } else {
        a
    };
    project_with(source, &omega, cfg.backend)
}

/// `||A - Q Q^T A||_F` in `f64`.
pub fn projection_error<T: Real, U: Real>(a: &Matrix<T>, q: &Matrix<U>) -> Result<f64> {
    let a = a.to_f64();
    let q = q.to_f64();
    let b = q.t_matmul(&a)?;
    Ok(a.sub(&q.matmul(&b)?)?.frobenius_norm())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RsvdResult {
    pub u: Matrix<f32>,
    pub s: Vec<f32>,
    pub v: Matrix<f32>,
    /// `||A - U S V^T||_F / ||A||_F`.
    pub residual: f64,
    /// `||A - Q Q^T A||_F` for the `p + s` column basis `Q`.
    pub projection_error: f64,
}

/// Rank-`p` randomized SVD with `p + oversampling` sketch columns.
pub fn rsvd(a: &Matrix<f32>, p: usize, cfg: &ProjectionConfig) -> Result<RsvdResult> {
    cfg.validate()?;
    let p_hat = p + cfg.oversampling;
    let y = random_project(a, cfg, p_hat)?.into_checked("random projection")?;
    let (q, _) = qr(&y)?;
    let b = q.t_matmul(a)?;
    let svd = svd_small(&b)?.truncate(p);
    let u = q.matmul(&svd.u)?;

    let a64 = a.to_f64();
    let norm_a = a64.frobenius_norm();
    if norm_a == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let mut us = u.to_f64();
    for (j, &sj) in svd.s.iter().enumerate() {
        for x in us.col_mut(j) {
            *x *= sj as f64;
        }
    }
    let approx = us.matmul(&svd.v.to_f64().transpose())?;
    let residual = a64.sub(&approx)?.frobenius_norm() / norm_a;
    let projection_error = projection_error(&a64, &q)?;
    Ok(RsvdResult { u, s: svd.s, v: svd.v, residual, projection_error })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HosvdResult {
    pub core: Tensor<f32>,
    /// `Q_i: I_i x J_i`, orthonormal columns.
    pub factors: Vec<Matrix<f32>>,
    /// `||A - core x_1 Q_1 ... x_N Q_N||_F / ||A||_F`.
    pub residual: f64,
}

/// Random-projection HOSVD with target multilinear rank `ranks`.
///
/// Mode `i` draws its own random matrix from `derive_seed(cfg.seed, i)`. The sketch
/// has exactly `J_i` columns; there is no oversampling.
pub fn rp_hosvd(a: &Tensor<f32>, ranks: &[usize], cfg: &ProjectionConfig) -> Result<HosvdResult> {
    cfg.validate()?;
    if ranks.len() != a.order() {
        return Err(Error::shape("rp_hosvd", format!("{} ranks for an order-{} tensor", ranks.len(), a.order())));
    }
    for (mode, (&j, &i)) in ranks.iter().zip(a.dims()).enumerate() {
        if j == 0 || j > i {
            return Err(Error::InvalidArgument(format!("rank {j} for mode {mode} of extent {i}")));
        }
    }
    let mut factors = Vec::with_capacity(ranks.len());
    for (mode, &j) in ranks.iter().enumerate() {
        let unfolded = a.unfold(mode)?;
        let w = sketch(&unfolded, cfg, j, derive_seed(cfg.seed, mode as u64))?.into_checked("mode sketch")?;
        factors.push(qr(&w)?.0);
    }
    let mut core = a.clone();
    for (mode, q) in factors.iter().enumerate() {
        core = core.mode_contract(q, mode)?;
    }

    let norm_a = a.frobenius_norm();
    if norm_a == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let mut recon = core.to_f64();
    for (mode, q) in factors.iter().enumerate() {
        recon = recon.mode_contract(&q.to_f64().transpose(), mode)?;
    }
    let residual = a.to_f64().sub(&recon)?.frobenius_norm() / norm_a;
    Ok(HosvdResult { core, factors, residual })
}

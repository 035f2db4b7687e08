//! The accuracy studies, as plain serialisable rows plus per-group summaries.
//!
//! Every function is deterministic in its configuration. Seeds are processed in
//! parallel, but rows always come back in configuration order.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floatfmt::{
    count_in_sigma, exp2i, gaussian_variance, not_normalized_probability, overflow_probability, round_to,
    underflow_probability, FloatFormat, RoundingMode,
};
use crate::linalg::{qr, Tensor};
use crate::matrix::Matrix;
use crate::mpgemm::{gemm_f64, relative_error};
use crate::randgen::{derive_seed, gaussian_matrix, uniform_matrix};
use crate::randnla::{projection_error, rp_hosvd, rsvd, Backend, ProjectionConfig};
use crate::testmats::{
    a_poly, cauchy_matrix, hosvd_test_tensor, matrix_type1, matrix_type2, matrix_with_spectrum, SpectrumKind,
    SpectrumSpec,
};

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn collect_seeds<T: Send>(seeds: &[u64], f: impl Fn(u64) -> Result<Vec<T>> + Sync) -> Result<Vec<T>> {
    let per_seed: Vec<Result<Vec<T>>> = seeds.par_iter().map(|&s| f(s)).collect();
    let mut out = Vec::new();
    for rows in per_seed {
        out.extend(rows?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Format statistics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmtStatsRow {
    pub format: String,
    pub exp_bits: u32,
    pub man_bits: u32,
    pub overflow_probability: f64,
    pub underflow_probability: f64,
    pub not_normalized_probability: f64,
    pub variance: f64,
    /// The window is `|v| < 2^sigma_exponent`.
    pub sigma_exponent: i32,
    pub sigma_bound: f64,
    pub count: u64,
}

/// One row per `(format, s)`.
pub fn fmt_stats(formats: &[FloatFormat], sigma_exponents: &[i32]) -> Vec<FmtStatsRow> {
    let mut rows = Vec::new();
    for &f in formats {
        let (ov, un, nn, var) =
            (overflow_probability(f), underflow_probability(f), not_normalized_probability(f), gaussian_variance(f));
        for &s in sigma_exponents {
            rows.push(FmtStatsRow {
                format: f.to_string(),
                exp_bits: f.exp_bits(),
                man_bits: f.man_bits(),
                overflow_probability: ov,
                underflow_probability: un,
                not_normalized_probability: nn,
                variance: var,
                sigma_exponent: s,
                sigma_bound: exp2i(s),
                count: count_in_sigma(f, s),
            });
        }
    }
    rows
}

// ---------------------------------------------------------------------------
// Mantissa sweep

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMatrix {
    Type1,
    Type2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MantissaSweepConfig {
    pub matrices: Vec<SweepMatrix>,
    pub n: usize,
    /// Target rank; the sketch has `p + oversampling` columns.
    pub p: usize,
    pub oversampling: usize,
    pub mantissas: Vec<u32>,
    pub seeds: Vec<u64>,
    pub r: usize,
    pub xi: f64,
    pub alpha: f64,
    pub phi: f64,
}

impl Default for MantissaSweepConfig {
    fn default() -> Self {
        MantissaSweepConfig {
            matrices: vec![SweepMatrix::Type1, SweepMatrix::Type2],
            n: 512,
            p: 20,
            oversampling: 10,
            mantissas: (1..=23).collect(),
            seeds: (0..10).collect(),
            r: 20,
            xi: 1e-4,
            alpha: 3.0,
            phi: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MantissaSweepRow {
    pub matrix: SweepMatrix,
    pub seed: u64,
    pub mantissa: u32,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MantissaSummaryRow {
    pub matrix: SweepMatrix,
    pub mantissa: u32,
    pub mean_error: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// `||A - Q Q^T A||_F` for random matrices in `e8mY`, all arithmetic in `f64`.
///
/// Per seed the `f32` Gaussian draws are fixed and only their rounding changes with `Y`.
pub fn mantissa_sweep(cfg: &MantissaSweepConfig) -> Result<(Vec<MantissaSweepRow>, Vec<MantissaSummaryRow>)> {
    let width = cfg.p + cfg.oversampling;
    if width > cfg.n {
        return Err(Error::InvalidArgument(format!("sketch width {width} exceeds n = {}", cfg.n)));
    }
    if let Some(&y) = cfg.mantissas.iter().find(|&&y| y > 23) {
        return Err(Error::InvalidArgument(format!("mantissa {y} exceeds the f32 draws")));
    }
    let mut rows = Vec::new();
    for &kind in &cfg.matrices {
        rows.extend(collect_seeds(&cfg.seeds, |seed| {
            let a = match kind {
                SweepMatrix::Type1 => matrix_type1(cfg.n, cfg.r, cfg.xi, seed),
                SweepMatrix::Type2 => matrix_type2(cfg.n, cfg.r, cfg.alpha, cfg.phi, seed),
            }
            .to_f64();
            let base = gaussian_matrix(cfg.n, width, FloatFormat::FP32, derive_seed(seed, 7));
            cfg.mantissas
                .iter()
                .map(|&y| {
                    let fmt = FloatFormat::new(8, y)?;
                    let omega = base.to_f64().map(|g| round_to(g, fmt, RoundingMode::RN));
                    let (q, _) = qr(&a.matmul(&omega)?)?;
                    Ok(MantissaSweepRow { matrix: kind, seed, mantissa: y, error: projection_error(&a, &q)? })
                })
                .collect()
        })?);
    }
    let mut groups: BTreeMap<(SweepMatrix, u32), Vec<f64>> = BTreeMap::new();
    for r in &rows {
        groups.entry((r.matrix, r.mantissa)).or_default().push(r.error);
    }
    let summary = groups
        .into_iter()
        .map(|((matrix, mantissa), v)| {
            let (mean_error, std_error) = mean_std(&v);
            MantissaSummaryRow { matrix, mantissa, mean_error, std_error, samples: v.len() }
        })
        .collect();
    Ok((rows, summary))
}

// ---------------------------------------------------------------------------
// GEMM accuracy

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputDist {
    /// `N(0, 1)`.
    Normal,
    /// `U(0, 1)`.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GemmAccuracyConfig {
    pub m: usize,
    pub n: usize,
    pub ks: Vec<usize>,
    pub backends: Vec<Backend>,
    pub dists: Vec<InputDist>,
    pub seeds: Vec<u64>,
}

impl Default for GemmAccuracyConfig {
    fn default() -> Self {
        GemmAccuracyConfig {
            m: 64,
            n: 64,
            ks: vec![64, 256, 1024, 4096],
            backends: Backend::ALL.to_vec(),
            dists: vec![InputDist::Normal, InputDist::Uniform],
            seeds: (0..5).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GemmAccuracyRow {
    pub dist: InputDist,
    pub k: usize,
    pub backend: Backend,
    pub seed: u64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GemmSummaryRow {
    pub dist: InputDist,
    pub k: usize,
    pub backend: Backend,
    pub median_error: f64,
    pub samples: usize,
}

/// `f32` `A` (`m x k`) and FP16-valued `B` (`k x n`) drawn from `dist`.
pub fn gemm_inputs(m: usize, k: usize, n: usize, dist: InputDist, seed: u64) -> (Matrix<f32>, Matrix<f32>) {
    let (sa, sb) = (derive_seed(seed, 0), derive_seed(seed, 1));
    match dist {
        InputDist::Normal => {
            (gaussian_matrix(m, k, FloatFormat::FP32, sa), gaussian_matrix(k, n, FloatFormat::FP16, sb))
        }
        InputDist::Uniform => (
            uniform_matrix(m, k, 0.0, 1.0, sa),
            uniform_matrix::<f32>(k, n, 0.0, 1.0, sb)
                .map(|x| round_to(x as f64, FloatFormat::FP16, RoundingMode::RN) as f32),
        ),
    }
}

pub fn gemm_accuracy(cfg: &GemmAccuracyConfig) -> Result<(Vec<GemmAccuracyRow>, Vec<GemmSummaryRow>)> {
    let mut rows = Vec::new();
    for &dist in &cfg.dists {
        for &k in &cfg.ks {
            rows.extend(collect_seeds(&cfg.seeds, |seed| {
                let (a, b) = gemm_inputs(cfg.m, k, cfg.n, dist, seed);
                let reference = gemm_f64(&a, &b)?;
                cfg.backends
                    .iter()
                    .map(|&backend| {
                        let c = backend.multiply(&a, &b)?;
                        Ok(GemmAccuracyRow { dist, k, backend, seed, relative_error: relative_error(&c, &reference)? })
                    })
                    .collect()
            })?);
        }
    }
    let mut groups: BTreeMap<(InputDist, usize, usize), Vec<f64>> = BTreeMap::new();
    for r in &rows {
        let b = cfg.backends.iter().position(|&x| x == r.backend).expect("configured backend");
        groups.entry((r.dist, r.k, b)).or_default().push(r.relative_error);
    }
    let summary = groups
        .into_iter()
        .map(|((dist, k, b), v)| GemmSummaryRow {
            dist,
            k,
            backend: cfg.backends[b],
            median_error: median(&v).expect("non-empty group"),
            samples: v.len(),
        })
        .collect();
    Ok((rows, summary))
}

// ---------------------------------------------------------------------------
// Randomized SVD

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RsvdMatrix {
    Linear,
    Exp,
    Poly,
    Cauchy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsvdConfig {
    pub matrices: Vec<RsvdMatrix>,
    pub n: usize,
    pub p: usize,
    pub oversampling: usize,
    pub power: u32,
    pub backends: Vec<Backend>,
    pub seeds: Vec<u64>,
    pub s_p_linear: f64,
    pub s_p_exp: f64,
    pub poly_r: usize,
    pub poly_alpha: f64,
    pub poly_phi: f64,
    pub cauchy_gamma: f64,
}

impl Default for RsvdConfig {
    fn default() -> Self {
        RsvdConfig {
            matrices: vec![RsvdMatrix::Linear, RsvdMatrix::Exp, RsvdMatrix::Poly, RsvdMatrix::Cauchy],
            n: 512,
            p: 32,
            oversampling: 10,
            power: 0,
            backends: vec![Backend::Ref32, Backend::ShgemmTf32, Backend::ShgemmFp16, Backend::LowprecDirect],
            seeds: (0..10).collect(),
            s_p_linear: DEFAULT_S_P_LINEAR,
            s_p_exp: DEFAULT_S_P_EXP,
            poly_r: 20,
            poly_alpha: 3.0,
            poly_phi: 1e6,
            cauchy_gamma: 1e-3,
        }
    }
}

/// `s_p` for the linear spectrum at desk scale.
pub const DEFAULT_S_P_LINEAR: f64 = 0.1;
/// `s_p` for the exponential spectrum at desk scale.
pub const DEFAULT_S_P_EXP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsvdRow {
    pub matrix: RsvdMatrix,
    pub backend: Backend,
    pub seed: u64,
    /// `ok`, or `failed_non_finite` when the sketch overflowed.
    pub status: String,
    pub residual: Option<f64>,
    /// Relative Eckart-Young floor, when the spectrum is known.
    pub floor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummaryRow {
    pub group: String,
    pub backend: Backend,
    pub median_residual: Option<f64>,
    pub median_floor: Option<f64>,
    pub failures: usize,
    pub runs: usize,
}

pub const STATUS_OK: &str = "ok";
pub const STATUS_NON_FINITE: &str = "failed_non_finite";

fn status_of<T>(r: &Result<T>) -> Result<Option<&T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::NonFinite { .. }) => Ok(None),
        Err(e) => Err(e.clone()),
    }
}

impl RsvdConfig {
    /// The matrix for one `(family, seed)` and its relative Eckart-Young floor, if known.
    pub fn matrix(&self, kind: RsvdMatrix, seed: u64) -> Result<(Matrix<f32>, Option<f64>)> {
        let spectrum = |k, s_p| -> Result<(Matrix<f32>, Option<f64>)> {
            let spec = SpectrumSpec::new(k, s_p, self.n, self.p)?;
            Ok((matrix_with_spectrum(&spec, seed), Some(spec.relative_floor())))
        };
        match kind {
            RsvdMatrix::Linear => spectrum(SpectrumKind::Linear, self.s_p_linear),
            RsvdMatrix::Exp => spectrum(SpectrumKind::Exp, self.s_p_exp),
            RsvdMatrix::Poly => Ok((a_poly(self.n, self.poly_r, self.poly_alpha, self.poly_phi, seed), None)),
            RsvdMatrix::Cauchy => Ok((cauchy_matrix(self.n, self.cauchy_gamma, seed)?, None)),
        }
    }
}

fn group_runs<K: Ord + Clone>(
    items: impl Iterator<Item = (K, Backend, Option<f64>, Option<f64>)>,
    label: impl Fn(&K) -> String,
) -> Vec<RunSummaryRow> {
    let mut groups: BTreeMap<(K, String), (Backend, Vec<f64>, Vec<f64>, usize, usize)> = BTreeMap::new();
    for (k, backend, residual, floor) in items {
        let e =
            groups.entry((k, backend.name().to_string())).or_insert_with(|| (backend, Vec::new(), Vec::new(), 0, 0));
        e.4 += 1;
        match residual {
            Some(r) => e.1.push(r),
            None => e.3 += 1,
        }
        if let Some(f) = floor {
            e.2.push(f);
        }
    }
    groups
        .into_iter()
        .map(|((k, _), (backend, res, floors, failures, runs))| RunSummaryRow {
            group: label(&k),
            backend,
            median_residual: median(&res),
            median_floor: median(&floors),
            failures,
            runs,
        })
        .collect()
}

fn matrix_label(m: &RsvdMatrix) -> String {
    match m {
        RsvdMatrix::Linear => "linear",
        RsvdMatrix::Exp => "exp",
        RsvdMatrix::Poly => "poly",
        RsvdMatrix::Cauchy => "cauchy",
    }
    .to_string()
}

/// Rank-`p` RSVD of every configured matrix family with every backend.
///
/// Backends share the matrix and the underlying Gaussian draws of a seed; SHGEMM
/// backends see them rounded to FP16, the others in `f32`.
pub fn rsvd_experiment(cfg: &RsvdConfig) -> Result<(Vec<RsvdRow>, Vec<RunSummaryRow>)> {
    let mut rows = Vec::new();
    for &kind in &cfg.matrices {
        rows.extend(collect_seeds(&cfg.seeds, |seed| {
            let (a, floor) = cfg.matrix(kind, seed)?;
            cfg.backends
                .iter()
                .map(|&backend| {
                    let pc = ProjectionConfig {
                        oversampling: cfg.oversampling,
                        power: cfg.power,
                        seed: derive_seed(seed, 11),
                        ..ProjectionConfig::with_backend(backend)
                    };
                    let result = rsvd(&a, cfg.p, &pc);
                    let residual = status_of(&result)?.map(|r| r.residual);
                    Ok(RsvdRow {
                        matrix: kind,
                        backend,
                        seed,
                        status: if residual.is_some() { STATUS_OK } else { STATUS_NON_FINITE }.into(),
                        residual,
                        floor,
                    })
                })
                .collect()
        })?);
    }
    let summary = group_runs(rows.iter().map(|r| (r.matrix, r.backend, r.residual, r.floor)), matrix_label);
    Ok((rows, summary))
}

// ---------------------------------------------------------------------------
// RP-HOSVD

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HosvdConfig {
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    pub padding: usize,
    pub backends: Vec<Backend>,
    pub seeds: Vec<u64>,
}

impl Default for HosvdConfig {
    fn default() -> Self {
        HosvdConfig {
            dims: vec![64, 64, 64],
            ranks: vec![16, 16, 16],
            padding: 4,
            backends: vec![Backend::Ref32, Backend::ShgemmTf32, Backend::ShgemmFp16, Backend::LowprecDirect],
            seeds: (0..10).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HosvdRow {
    pub backend: Backend,
    pub seed: u64,
    pub status: String,
    pub residual: Option<f64>,
}

pub fn rphosvd_experiment(cfg: &HosvdConfig) -> Result<(Vec<HosvdRow>, Vec<RunSummaryRow>)> {
    let rows = collect_seeds(&cfg.seeds, |seed| {
        let t: Tensor<f32> = hosvd_test_tensor(&cfg.dims, &cfg.ranks, cfg.padding, seed)?;
        cfg.backends
            .iter()
            .map(|&backend| {
                let pc = ProjectionConfig { seed: derive_seed(seed, 13), ..ProjectionConfig::with_backend(backend) };
                let result = rp_hosvd(&t, &cfg.ranks, &pc);
                let residual = status_of(&result)?.map(|r| r.residual);
                Ok(HosvdRow {
                    backend,
                    seed,
                    status: if residual.is_some() { STATUS_OK } else { STATUS_NON_FINITE }.into(),
                    residual,
                })
            })
            .collect()
    })?;
    let summary = group_runs(rows.iter().map(|r| ((), r.backend, r.residual, None)), |_| "tensor".to_string());
    Ok((rows, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_moments() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn fmt_stats_rows() {
        let rows = fmt_stats(&[FloatFormat::FP16], &[0, 1, 2]);
        let counts: Vec<u64> = rows.iter().map(|r| r.count).collect();
        assert_eq!(counts, vec![30_719, 32_767, 34_815]);
    }

    #[test]
    fn small_sweep_runs() {
        let cfg = MantissaSweepConfig {
            n: 40,
            p: 4,
            oversampling: 4,
            r: 4,
            mantissas: vec![2, 23],
            seeds: vec![0, 1],
            ..Default::default()
        };
        let (rows, summary) = mantissa_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(summary.len(), 4);
    }
}

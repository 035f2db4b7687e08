use mprp::experiments::*;
use mprp::randnla::Backend;
use mprp::FloatFormat;

#[test]
fn fmt_stats_table_counts() {
    let rows = fmt_stats(&[FloatFormat::FP32, FloatFormat::FP8_E4M3], &[0, 1, 2]);
    let counts: Vec<u64> = rows.iter().map(|r| r.count).collect();
    assert_eq!(counts, vec![2_130_706_431, 2_147_483_647, 2_164_260_863, 111, 127, 143]);
    assert!(rows.iter().all(|r| r.sigma_bound == 2f64.powi(r.sigma_exponent)));
}

#[test]
fn mantissa_sweep_is_deterministic_and_flat() {
    let cfg = MantissaSweepConfig {
        n: 96,
        p: 8,
        oversampling: 6,
        r: 8,
        mantissas: vec![1, 4, 10, 23],
        seeds: vec![0, 1, 2],
        ..Default::default()
    };
    let a = mantissa_sweep(&cfg).unwrap();
    assert_eq!(a, mantissa_sweep(&cfg).unwrap());
    for kind in [SweepMatrix::Type1, SweepMatrix::Type2] {
        let means: Vec<f64> = a.1.iter().filter(|r| r.matrix == kind).map(|r| r.mean_error).collect();
        let (lo, hi) = means.iter().fold((f64::MAX, 0f64), |(l, h), &m| (l.min(m), h.max(m)));
        assert!(hi / lo < 1.2, "{kind:?}: {means:?}");
    }
    let bad = MantissaSweepConfig { mantissas: vec![24], ..cfg.clone() };
    assert!(mantissa_sweep(&bad).is_err());
}

#[test]
fn gemm_accuracy_rows_and_order() {
    let cfg = GemmAccuracyConfig { m: 8, n: 8, ks: vec![32, 128], seeds: vec![0, 1, 2], ..Default::default() };
    let (rows, summary) = gemm_accuracy(&cfg).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 3 * Backend::ALL.len());
    assert_eq!(summary.len(), 2 * 2 * Backend::ALL.len());
    assert!(summary.iter().all(|s| s.samples == 3 && s.median_error.is_finite()));
    assert_eq!(rows, gemm_accuracy(&cfg).unwrap().0);
}

#[test]
fn rsvd_experiment_flags_cauchy_failures() {
    let cfg = RsvdConfig {
        matrices: vec![RsvdMatrix::Linear, RsvdMatrix::Cauchy],
        n: 128,
        p: 8,
        seeds: vec![0, 1],
        ..Default::default()
    };
    let (rows, summary) = rsvd_experiment(&cfg).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 4);
    for r in &rows {
        let should_fail = r.matrix == RsvdMatrix::Cauchy && r.backend == Backend::ShgemmFp16;
        assert_eq!(r.status == STATUS_NON_FINITE, should_fail, "{r:?}");
        assert_eq!(r.residual.is_none(), should_fail);
        if let (Some(res), Some(floor)) = (r.residual, r.floor) {
            assert!(res >= floor * (1.0 - 1e-4));
        }
    }
    let failed = summary.iter().find(|s| s.group == "cauchy" && s.backend == Backend::ShgemmFp16).unwrap();
    assert_eq!((failed.failures, failed.runs, failed.median_residual), (2, 2, None));
    assert_eq!(rows, rsvd_experiment(&cfg).unwrap().0);
}

#[test]
fn hosvd_experiment_small() {
    let cfg = HosvdConfig {
        dims: vec![16, 16, 16],
        ranks: vec![4, 4, 4],
        padding: 1,
        seeds: vec![0, 1],
        ..Default::default()
    };
    let (rows, summary) = rphosvd_experiment(&cfg).unwrap();
    assert_eq!(rows.len(), 8);
    assert_eq!(summary.len(), 4);
    assert!(rows.iter().all(|r| r.status == STATUS_OK));
    let median_of = |b| summary.iter().find(|s| s.backend == b).unwrap().median_residual.unwrap();
    assert!(median_of(Backend::Ref32) < 1e-5);
    assert_eq!(rows, rphosvd_experiment(&cfg).unwrap().0);
}

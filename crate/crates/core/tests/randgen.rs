use mprp::floatfmt::gaussian_variance;
use mprp::linalg::numerical_rank;
use mprp::randgen::{derive_seed, gaussian_matrix, sparse_sign_matrix};
use mprp::theory::{check_pinv, check_sgt};
use mprp::FloatFormat;

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn fp16_gaussian_moments() {
    let g = gaussian_matrix(1000, 1000, FloatFormat::FP16, 3);
    let vals: Vec<f64> = g.as_slice().iter().map(|&x| x as f64).collect();
    let (mean, se) = mean_and_se(&vals);
    assert!(mean.abs() < 3.0 * se, "mean {mean} se {se}");
    let sq: Vec<f64> = vals.iter().map(|x| x * x).collect();
    let (var, se) = mean_and_se(&sq);
    assert!((var - gaussian_variance(FloatFormat::FP16)).abs() < 3.0 * se, "var {var} se {se}");
}

#[test]
fn fp32_gaussian_is_unrounded() {
    let g = gaussian_matrix(50, 4, FloatFormat::FP32, 8);
    let h = gaussian_matrix(50, 4, FloatFormat::FP16, 8);
    assert!(g.as_slice().iter().zip(h.as_slice()).any(|(a, b)| a != b));
    assert!(h
        .as_slice()
        .iter()
        .zip(g.as_slice())
        .all(|(&b, &a)| { FloatFormat::FP16.round(a as f64, mprp::RoundingMode::RN) == b as f64 }));
}

#[test]
fn sparse_sign_statistics() {
    let r = sparse_sign_matrix(200, 50, 1.0, 1).unwrap();
    assert!(r.as_slice().iter().all(|&x| x == 1.0 || x == -1.0));

    let n = 1_000_000usize;
    let m = sparse_sign_matrix(1000, 1000, 3.0, 2).unwrap();
    let zeros = m.as_slice().iter().filter(|&&x| x == 0.0).count() as f64 / n as f64;
    let se = (2.0 / 3.0 * (1.0 / 3.0) / n as f64).sqrt();
    assert!((zeros - 2.0 / 3.0).abs() < 3.0 * se, "zero fraction {zeros}");
    let plus = m.as_slice().iter().filter(|&&x| x == 1.0).count() as f64 / n as f64;
    assert!((plus - 1.0 / 6.0).abs() < 3.0 * (1.0 / 6.0 * 5.0 / 6.0 / n as f64).sqrt());

    let very = sparse_sign_matrix(400, 400, 20.0, 3).unwrap();
    let nz = very.as_slice().iter().filter(|&&x| x != 0.0).count() as f64 / 160_000.0;
    assert!((nz - 0.05).abs() < 0.005);
    assert!(sparse_sign_matrix(2, 2, 0.5, 0).is_err());
}

#[test]
fn generation_is_reproducible() {
    for fmt in [FloatFormat::FP16, FloatFormat::FP8_E4M3, FloatFormat::FP32] {
        assert_eq!(gaussian_matrix(33, 17, fmt, 99), gaussian_matrix(33, 17, fmt, 99));
    }
    assert_eq!(sparse_sign_matrix(9, 9, 3.0, 5).unwrap(), sparse_sign_matrix(9, 9, 3.0, 5).unwrap());
    assert_ne!(derive_seed(1, 2), derive_seed(2, 1));
}

#[test]
fn fp16_gaussians_have_full_rank() {
    for seed in 0..1000u64 {
        let k = 8 + (seed as usize % 57);
        let g = gaussian_matrix(k, k, FloatFormat::FP16, seed).to_f64();
        assert_eq!(numerical_rank(&g, 1e-10).unwrap(), k, "seed {seed}");
    }
}

#[test]
fn sgt_expectation_scales_with_variance() {
    for fmt in [FloatFormat::FP16, FloatFormat::FP8_E4M3, FloatFormat::new(8, 1).unwrap()] {
        let est = check_sgt(fmt, 8, 10_000, 21).unwrap();
        assert!(est.z_score() < 5.0, "{fmt}: {est:?}");
    }
}

#[test]
fn pseudo_inverse_expectation_scales_with_variance() {
    for fmt in [FloatFormat::FP16, FloatFormat::FP8_E4M3] {
        let est = check_pinv(fmt, 8, 5, 10_000, 22).unwrap();
        assert!(est.z_score() < 5.0, "{fmt}: {est:?}");
    }
}

use mprp::floatfmt::{
    count_in_sigma, enumerate_values, exp_of, gaussian_variance, not_normalized_probability, overflow_probability,
    round_to, underflow_probability,
};
use mprp::{FloatFormat, RoundingMode};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn small_formats() -> impl Strategy<Value = FloatFormat> {
    (2u32..=8, 0u32..=12).prop_map(|(x, y)| FloatFormat::new(x, y).unwrap())
}

fn any_format() -> impl Strategy<Value = FloatFormat> {
    (2u32..=11, 0u32..=52).prop_map(|(x, y)| FloatFormat::new(x, y).unwrap())
}

/// Finite values spread over many binades, both signs.
fn wide_f64() -> impl Strategy<Value = f64> {
    (any::<bool>(), 1.0f64..2.0, -80i32..80).prop_map(|(neg, m, e)| {
        let v = m * 2f64.powi(e);
        if neg {
            -v
        } else {
            v
        }
    })
}

fn std_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Nearest value from a sorted list, ties to the even encoding.
fn nearest_listed(values: &[f64], fmt: FloatFormat, x: f64) -> f64 {
    let i = values.partition_point(|&v| v < x);
    if i == 0 {
        return values[0];
    }
    if i == values.len() {
        return values[values.len() - 1];
    }
    let (lo, hi) = (values[i - 1], values[i]);
    let (dl, dh) = (x - lo, hi - x);
    if dl < dh {
        lo
    } else if dh < dl {
        hi
    } else if fmt.encode(lo) & 1 == 0 {
        lo
    } else {
        hi
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn rn_error_within_unit_roundoff_of_binade(fmt in any_format(), x in wide_f64()) {
        let r = round_to(x, fmt, RoundingMode::RN);
        if r.is_finite() && r.abs() >= fmt.min_normal() {
            prop_assert!((r - x).abs() <= exp_of(r) * fmt.unit_roundoff());
        }
    }

    #[test]
    fn rz_error_within_twice_unit_roundoff(fmt in any_format(), x in wide_f64()) {
        let r = round_to(x, fmt, RoundingMode::RZ);
        prop_assert!(r.abs() <= x.abs());
        if r.abs() >= fmt.min_normal() && x.abs() <= fmt.max_value() {
            prop_assert!((r - x).abs() <= 2.0 * fmt.unit_roundoff() * r.abs());
        }
    }

    #[test]
    fn rounding_is_idempotent(fmt in any_format(), x in wide_f64()) {
        for mode in [RoundingMode::RN, RoundingMode::RZ] {
            let r = round_to(x, fmt, mode);
            prop_assert_eq!(round_to(r, fmt, mode).to_bits(), r.to_bits());
            prop_assert!(r.is_infinite() || fmt.is_representable(r));
        }
    }

    #[test]
    fn rn_matches_nearest_enumerated_value(fmt in small_formats(), u in -1.0f64..1.0, scale in -20i32..20) {
        let values = enumerate_values(fmt).unwrap();
        let x = u * 2f64.powi(scale);
        let r = round_to(x, fmt, RoundingMode::RN);
        if x.abs() < fmt.max_value() {
            let want = nearest_listed(&values, fmt, x);
            prop_assert_eq!(r, want, "x = {:e}", x);
        }
    }

    #[test]
    fn encode_decode_round_trip(fmt in small_formats(), idx in any::<prop::sample::Index>()) {
        let values = enumerate_values(fmt).unwrap();
        let v = values[idx.index(values.len())];
        prop_assert_eq!(fmt.decode(fmt.encode(v)), v);
    }
}

#[test]
fn count_matches_enumeration_for_every_enumerable_format() {
    for x in 2..=8 {
        for y in 0..=10 {
            let fmt = FloatFormat::new(x, y).unwrap();
            let values = enumerate_values(fmt).unwrap();
            for s in 0..=2 {
                let limit = 2f64.powi(s);
                let brute = values.iter().filter(|v| v.abs() < limit).count() as u64;
                assert_eq!(count_in_sigma(fmt, s), brute, "{fmt} s={s}");
            }
        }
    }
}

#[test]
fn enumeration_shape() {
    let tiny = enumerate_values(FloatFormat::new(2, 1).unwrap()).unwrap();
    assert_eq!(tiny, vec![-3.0, -2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0]);
    let fp16 = enumerate_values(FloatFormat::FP16).unwrap();
    assert_eq!(*fp16.last().unwrap(), 65504.0);
    assert_eq!(fp16.len(), 2 * 31 * 1024 - 1);
    assert!(fp16.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn tiny_values_flush_to_zero() {
    assert_eq!(round_to(2f64.powi(-25), FloatFormat::FP16, RoundingMode::RN), 0.0);
    assert_eq!(round_to(1.5 * 2f64.powi(-25), FloatFormat::FP16, RoundingMode::RN), 2f64.powi(-24));
    assert_eq!(round_to(65504.0 * 2.0, FloatFormat::FP16, RoundingMode::RN), f64::INFINITY);
    assert_eq!(round_to(-1.0e9, FloatFormat::FP16, RoundingMode::RZ), -65504.0);
}

/// Second moment of RN-rounded N(0,1) by summing over every value of the format.
fn variance_by_enumeration(fmt: FloatFormat) -> f64 {
    let values = enumerate_values(fmt).unwrap();
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = if i == 0 { f64::NEG_INFINITY } else { 0.5 * (values[i - 1] + values[i]) };
            let hi = if i + 1 == n { f64::INFINITY } else { 0.5 * (values[i] + values[i + 1]) };
            let mass = if hi <= 0.0 {
                std_cdf(hi) - std_cdf(lo)
            } else {
                // Upper tail via erfc of the negated bounds keeps precision.
                std_cdf(-lo) - std_cdf(-hi)
            };
            values[i] * values[i] * mass
        })
        .sum()
}

#[test]
fn variance_matches_enumeration() {
    for (x, y) in [(4, 3), (5, 2), (5, 10), (8, 2), (8, 5), (8, 7), (8, 10), (8, 12), (3, 4), (6, 6)] {
        let fmt = FloatFormat::new(x, y).unwrap();
        let closed = gaussian_variance(fmt);
        let brute = variance_by_enumeration(fmt);
        assert!((closed - brute).abs() < 1e-12, "{fmt}: {closed} vs {brute}");
    }
}

#[test]
fn variance_increases_toward_one() {
    let alphas: Vec<f64> = (2..=12).map(|y| gaussian_variance(FloatFormat::new(8, y).unwrap())).collect();
    for w in alphas.windows(2) {
        assert!(w[0] < w[1] && w[1] < 1.0, "{alphas:?}");
    }
    assert!((gaussian_variance(FloatFormat::FP32) - 1.0).abs() < 1e-6);
    let e4m3 = gaussian_variance(FloatFormat::FP8_E4M3);
    let fp16 = gaussian_variance(FloatFormat::FP16);
    assert!((fp16 - 1.0).abs() < (e4m3 - 1.0).abs());
}

#[test]
fn variance_by_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let fmt = FloatFormat::new(8, 2).unwrap();
    let n = 2_000_000;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let g: f64 = rng.sample(StandardNormal);
        let v = round_to(g, fmt, RoundingMode::RN).powi(2);
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / n as f64;
    let se = ((sum_sq / n as f64 - mean * mean) / n as f64).sqrt();
    assert!((mean - gaussian_variance(fmt)).abs() < 5.0 * se, "{mean} +- {se}");
}

#[test]
fn tail_probabilities_by_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 100_000_000u64;
    let formats = [FloatFormat::FP8_E4M3, FloatFormat::FP8_E5M2];
    // Underflow is observed through rounding itself; the not-normalized event uses
    // the documented half-min-normal threshold.
    let mut hits = vec![(0u64, 0u64); formats.len()];
    for _ in 0..n {
        let g: f64 = rng.sample::<f64, _>(StandardNormal).abs();
        for (h, f) in hits.iter_mut().zip(&formats) {
            if g < f.min_normal() {
                h.0 += (round_to(g, *f, RoundingMode::RN) == 0.0) as u64;
                h.1 += (g < f.min_normal() / 2.0) as u64;
            }
        }
    }
    for (fmt, &(uf, dn)) in formats.iter().zip(&hits) {
        for (label, count, p) in
            [("underflow", uf, underflow_probability(*fmt)), ("not normalized", dn, not_normalized_probability(*fmt))]
        {
            let mc = count as f64 / n as f64;
            assert!(p >= 1e-6, "{fmt} {label}: {p} is too small to sample");
            assert!(mc / p > 0.5 && mc / p < 2.0, "{fmt} {label}: {p} vs MC {mc}");
        }
        assert!(overflow_probability(*fmt) < 1e-12);
    }
}

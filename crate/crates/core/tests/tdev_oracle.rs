mod common;

use asymdelay::stability_metrics::{default_m_grid, tdev, tdev_gap_free};
use asymdelay::Error;
use common::{brute_tdev, loglog_slope};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn white(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

#[test]
fn agrees_with_definition_on_random_series() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let n = rng.random_range(4..=2000);
        let offset = rng.random_range(-1e4..1e4);
        let x: Vec<f64> = (0..n).map(|_| offset + rng.random_range(-50.0..50.0)).collect();
        let grid = default_m_grid(n);
        let curve = tdev(&x, 1.0, &grid).unwrap();
        for p in &curve.points {
            let want = brute_tdev(&x, p.m);
            assert!(rel_err(p.tdev_ps, want) <= 1e-12, "n={n} m={} {} vs {want}", p.m, p.tdev_ps);
        }
    }
}

#[test]
fn constant_and_ramp_are_exactly_zero() {
    let c = vec![-9912.8; 1000];
    let ramp: Vec<f64> = (0..1000).map(|i| 3.0 + 0.25 * i as f64).collect();
    for x in [&c, &ramp] {
        for p in tdev(x, 1.0, &default_m_grid(x.len())).unwrap().points {
            assert_eq!(p.tdev_ps, 0.0, "m={}", p.m);
        }
    }
}

#[test]
fn white_noise_slope_is_minus_half() {
    let x = white(10_000, 1.0, 5);
    let curve = tdev(&x, 1.0, &default_m_grid(x.len())).unwrap();
    let pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.tau_s, p.tdev_ps)).collect();
    let slope = loglog_slope(&pts);
    assert!((slope + 0.5).abs() <= 0.1, "slope {slope}");
}

#[test]
fn white_noise_first_point_is_sigma() {
    let sigma = 2.5;
    let x = white(100_000, sigma, 8);
    let p = tdev(&x, 1.0, &[1]).unwrap().points[0];
    assert!((p.tdev_ps / sigma - 1.0).abs() < 0.02, "{}", p.tdev_ps);
}

#[test]
fn gaps_are_refused() {
    let x = vec![Some(1.0), None, Some(2.0), Some(3.0), Some(4.0)];
    assert!(matches!(tdev_gap_free(&x, 1.0, &[1]), Err(Error::Gaps { gaps: 1, total: 5 })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn invariant_under_offset_and_trend(
        x in proptest::collection::vec(-100.0..100.0f64, 16..400),
        c in -1e4..1e4f64,
        slope in -5.0..5.0f64,
    ) {
        let grid = default_m_grid(x.len());
        let base = tdev(&x, 1.0, &grid).unwrap();
        let moved: Vec<f64> = x.iter().enumerate().map(|(i, v)| v + c + slope * i as f64).collect();
        let shifted = tdev(&moved, 1.0, &grid).unwrap();
        for (a, b) in base.points.iter().zip(&shifted.points) {
            prop_assert!((a.tdev_ps - b.tdev_ps).abs() <= 1e-6 * (1.0 + a.tdev_ps), "m={} {} {}", a.m, a.tdev_ps, b.tdev_ps);
        }
    }

    #[test]
    fn scales_linearly(x in proptest::collection::vec(-100.0..100.0f64, 16..400), k in -20.0..20.0f64) {
        let grid = default_m_grid(x.len());
        let base = tdev(&x, 1.0, &grid).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| k * v).collect();
        let out = tdev(&scaled, 1.0, &grid).unwrap();
        for (a, b) in base.points.iter().zip(&out.points) {
            prop_assert!((b.tdev_ps - k.abs() * a.tdev_ps).abs() <= 1e-9 * (1.0 + b.tdev_ps));
        }
    }

    #[test]
    fn non_negative_and_tau_follows_m(x in proptest::collection::vec(-100.0..100.0f64, 4..300), tau0 in 0.1..10.0f64) {
        let curve = tdev(&x, tau0, &default_m_grid(x.len())).unwrap();
        for p in &curve.points {
            prop_assert!(p.tdev_ps >= 0.0);
            prop_assert_eq!(p.tau_s, p.m as f64 * tau0);
            prop_assert_eq!(p.n_terms, x.len() + 1 - 3 * p.m);
        }
    }
}

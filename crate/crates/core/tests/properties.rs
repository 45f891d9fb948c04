use arw_core::correlations::*;
use arw_core::field::{CovarianceKernel, WaveSample};
use arw_core::lattice::*;
use arw_core::moments::{disc_ft, lens_area};
use arw_core::nodal::Ball;
use arw_core::sectors::{nu_intervals, signed_sums};
use arw_core::DEFAULT_WORK_LIMIT;
use proptest::prelude::*;
use std::f64::consts::PI;

fn in_s(max: u64) -> impl Strategy<Value = u64> {
    let list = sum_two_squares_up_to(max);
    (0..list.len()).prop_map(move |i| list[i])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn r2_methods_agree(n in 1u64..200_000) {
        prop_assert_eq!(r2_brute(n), r2_formula(n));
    }

    #[test]
    fn r2_multiplicative(a in 1u64..3000, b in 1u64..3000) {
        let gcd = |mut x: u64, mut y: u64| { while y != 0 { (x, y) = (y, x % y); } x };
        prop_assume!(gcd(a, b) == 1);
        prop_assert_eq!(4 * r2_formula(a * b), r2_formula(a) * r2_formula(b));
    }

    #[test]
    fn zygmund_identity(n in in_s(5000)) {
        let nn = Eigenspace::new(n).unwrap().dim() as u64;
        prop_assert_eq!(spectral_correlations(n, 4, DEFAULT_WORK_LIMIT).unwrap(), 3 * nn * nn - 3 * nn);
        prop_assert_eq!(diagonal_correlations(n, 4).unwrap(), 3 * nn * nn - 3 * nn);
        prop_assert_eq!(spectral_correlations(n, 2, DEFAULT_WORK_LIMIT).unwrap(), nn);
    }

    #[test]
    fn diagonal_bounds_spectral(n in in_s(400)) {
        prop_assert!(diagonal_correlations(n, 6).unwrap() <= spectral_correlations(n, 6, DEFAULT_WORK_LIMIT).unwrap());
    }

    #[test]
    fn quasi_monotone_in_radius(n in in_s(2000), k in 0.5f64..20.0) {
        let a = quasi_correlations(n, 2, k, 0, DEFAULT_WORK_LIMIT).unwrap().count;
        let b = quasi_correlations(n, 2, 1.5 * k, 0, DEFAULT_WORK_LIMIT).unwrap().count;
        prop_assert!(a <= b);
    }

    #[test]
    fn fourier_coefficients(n in in_s(20_000), k in 1i64..12) {
        let e = Eigenspace::new(n).unwrap();
        let t = e.tau_hat(k);
        prop_assert!(t.abs() <= 1.0 + 1e-12);
        if k % 4 != 0 {
            prop_assert!(t.abs() < 1e-12);
        }
        prop_assert_eq!(e.dim(), r2_formula(n) as usize);
    }

    #[test]
    fn kernel_symmetric_and_bounded(n in in_s(3000), x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let k = CovarianceKernel::new(&Eigenspace::new(n).unwrap());
        let r = k.r([x, y]);
        prop_assert!(r.abs() <= 1.0 + 1e-12);
        prop_assert!((r - k.r([-x, -y])).abs() < 1e-12);
        prop_assert!((r - k.r([-y, x])).abs() < 1e-12);
        prop_assert!((r - k.r([y, x])).abs() < 1e-12);
        prop_assert!((r - k.r([x + 1.0, y - 2.0])).abs() < 1e-10);
    }

    #[test]
    fn grid_agrees_with_direct(n in in_s(500), seed in 0u64..1000, j in 0usize..64, k in 0usize..64) {
        let w = WaveSample::sample(&Eigenspace::new(n).unwrap(), seed, 0);
        let g = 64;
        prop_assume!(g > 2 * (n as f64).sqrt().ceil() as usize);
        let grid = w.evaluate_grid(g).unwrap();
        let direct = w.value_at([j as f64 / g as f64, k as f64 / g as f64]);
        prop_assert!((grid[[j, k]] - direct).abs() < 1e-10);
    }

    #[test]
    fn disc_transform_bounded(x in -50.0f64..50.0, y in -50.0f64..50.0, s in 0.01f64..0.5) {
        prop_assert!(disc_ft([x, y], s).abs() <= PI * s * s * (1.0 + 1e-12));
    }

    #[test]
    fn lens_area_monotone(d in 0.0f64..1.0, e in 0.0f64..0.1, s in 0.01f64..0.5) {
        let a = lens_area(d, s);
        prop_assert!((0.0..=PI * s * s + 1e-15).contains(&a));
        prop_assert!(lens_area(d + e, s) <= a + 1e-15);
    }

    #[test]
    fn clip_bounded(px in 0.0f64..1.0, py in 0.0f64..1.0, dx in -0.05f64..0.05, dy in -0.05f64..0.05, s in 0.01f64..0.49) {
        let b = Ball::centred(s);
        let c = b.clip([px, py], [px + dx, py + dy]);
        prop_assert!(c >= 0.0);
        prop_assert!(c <= dx.hypot(dy) + 1e-15);
        prop_assert!(c <= 2.0 * s + 1e-15);
    }

    #[test]
    fn signed_sums_symmetric(ts in proptest::collection::vec(0.0f64..1.0, 1..8)) {
        let sums = signed_sums(&ts);
        prop_assert_eq!(sums.len(), 1 << ts.len());
        for (a, b) in sums.iter().zip(sums.iter().rev()) {
            prop_assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn intervals_ordered(s in 0.01f64..std::f64::consts::FRAC_PI_4, k in 1usize..25) {
        let iv = nu_intervals(s, k).unwrap();
        prop_assert_eq!(iv.len(), k);
        prop_assert!(iv.windows(2).all(|w| w[0].1 < w[1].0));
        prop_assert!((iv[k - 1].0 - s / 2.0).abs() < 1e-15);
    }
}

use arw_core::correlations::*;
use arw_core::lattice::{sum_two_squares_up_to, Eigenspace};
use arw_core::{Error, DEFAULT_WORK_LIMIT};
use std::f64::consts::FRAC_PI_2;

/// Every ordered `l`-tuple sum, by exhaustive nested loops.
fn tuple_sums_oracle(n: u64, l: usize) -> Vec<(i64, i64)> {
    let pts = Eigenspace::new(n).unwrap().points;
    let mut sums = vec![(0i64, 0i64)];
    for _ in 0..l {
        sums = sums
            .iter()
            .flat_map(|&(x, y)| pts.iter().map(move |&(a, b)| (x + a, y + b)))
            .collect();
    }
    sums
}

fn spectral_oracle(n: u64, l: usize) -> u64 {
    tuple_sums_oracle(n, l).iter().filter(|&&s| s == (0, 0)).count() as u64
}

fn quasi_oracle(n: u64, l: usize, k: f64) -> u64 {
    tuple_sums_oracle(n, l)
        .iter()
        .filter(|&&(x, y)| {
            let q = (x * x + y * y) as f64;
            q > 0.0 && q <= k * k
        })
        .count() as u64
}

#[test]
fn spectral_examples() {
    assert_eq!(spectral_correlations(5, 2, DEFAULT_WORK_LIMIT).unwrap(), 8);
    assert_eq!(spectral_correlations(5, 4, DEFAULT_WORK_LIMIT).unwrap(), 168);
    assert_eq!(spectral_correlations(1, 4, DEFAULT_WORK_LIMIT).unwrap(), 36);
}

#[test]
fn spectral_matches_exhaustive() {
    for n in [1u64, 2, 5, 25, 65, 85] {
        for l in [2usize, 3, 4] {
            assert_eq!(spectral_correlations(n, l, DEFAULT_WORK_LIMIT).unwrap(), spectral_oracle(n, l), "n={n} l={l}");
        }
    }
    assert_eq!(spectral_correlations(65, 6, DEFAULT_WORK_LIMIT).unwrap(), spectral_oracle(65, 6));
}

#[test]
fn diagonal_examples() {
    assert_eq!(diagonal_correlations(1, 4).unwrap(), 36);
    assert_eq!(diagonal_correlations(5, 4).unwrap(), 168);
    assert_eq!(diagonal_correlations(5, 2).unwrap(), 8);
    // l = 6: pairings of six slots into antipodal pairs, 15 N^3 minus collisions
    assert_eq!(diagonal_correlations(1, 6).unwrap(), spectral_oracle(1, 6));
}

#[test]
fn quasi_examples() {
    assert_eq!(quasi_correlations(5, 2, 1.0, 0, DEFAULT_WORK_LIMIT).unwrap().count, 0);
    assert_eq!(quasi_correlations(5, 2, 1.5, 0, DEFAULT_WORK_LIMIT).unwrap().count, 8);
    assert_eq!(quasi_correlations(1, 2, 1.0, 0, DEFAULT_WORK_LIMIT).unwrap().count, 0);
}

#[test]
fn quasi_matches_exhaustive() {
    for n in [5u64, 25, 65, 85] {
        for l in [2usize, 3, 4] {
            for k in [1.0, 1.5, 3.0, 7.5] {
                let got = quasi_correlations(n, l, k, 3, DEFAULT_WORK_LIMIT).unwrap();
                assert_eq!(got.count, quasi_oracle(n, l, k), "n={n} l={l} k={k}");
                assert_eq!(got.tuples.len() as u64, got.count.min(3));
                for t in &got.tuples {
                    let (x, y) = t.iter().fold((0, 0), |a, p| (a.0 + p.0, a.1 + p.1));
                    let q = (x * x + y * y) as f64;
                    assert!(q > 0.0 && q <= k * k);
                }
            }
        }
    }
}

#[test]
fn quasi_work_limit() {
    let err = quasi_correlations(1105, 6, 10.0, 0, 1000).unwrap_err();
    assert!(matches!(err, Error::WorkLimit { .. }));
}

#[test]
fn separatedness_examples() {
    assert!(separated(5, 2, 0.4).unwrap());
    assert!(!separated(5, 2, 0.1).unwrap());
    for d in [0.05, 0.2, 0.45] {
        assert!(separated(1, 2, d).unwrap());
    }
}

#[test]
fn threshold_rules() {
    let a = ThresholdRule::HalfMinusDelta.threshold(100, 0.2);
    let b = ThresholdRule::HalfOfOneMinusDelta.threshold(100, 0.2);
    assert!((a - 100f64.powf(0.3)).abs() < 1e-12);
    assert!((b - 100f64.powf(0.4)).abs() < 1e-12);
}

#[test]
fn scan_small_range() {
    let r = scan_exceptional(16, 2, 0.1, ThresholdRule::HalfMinusDelta, DEFAULT_WORK_LIMIT).unwrap();
    let expected: Vec<u64> = sum_two_squares_up_to(32)
        .into_iter()
        .filter(|&n| n >= 16)
        .filter(|&n| quasi_oracle(n, 2, (n as f64).powf(0.4)) > 0)
        .collect();
    assert_eq!(r.exceptional, expected);
    assert_eq!(r.scanned, r.rows.len());
    assert!((0.0..=1.0).contains(&r.fraction));
    assert!(r.skipped.is_empty());
}

#[test]
fn scan_monotone_in_delta() {
    let a = scan_exceptional(64, 2, 0.1, ThresholdRule::HalfMinusDelta, DEFAULT_WORK_LIMIT).unwrap();
    let b = scan_exceptional(64, 2, 0.2, ThresholdRule::HalfMinusDelta, DEFAULT_WORK_LIMIT).unwrap();
    assert!(b.exceptional.iter().all(|n| a.exceptional.contains(n)));
}

#[test]
fn scan_near_half_is_mostly_exceptional() {
    let r = scan_exceptional(256, 2, 1e-3, ThresholdRule::HalfMinusDelta, DEFAULT_WORK_LIMIT).unwrap();
    assert!(r.fraction > 0.9, "{}", r.fraction);
}

#[test]
fn implication_examples() {
    let c = check_two_implies_four(5, 0.2).unwrap();
    assert!(c.implication_holds);
    for n in sum_two_squares_up_to(200).into_iter().filter(|&n| n >= 100) {
        let c = check_two_implies_four(n, 0.2).unwrap();
        if !c.holds2 {
            assert!(c.implication_holds);
        }
        assert!(c.implication_holds, "n = {n}");
    }
    assert!(check_two_implies_four(5, 0.3).is_err());
}

/// Direct enumeration for `k = 1`: one Gaussian integer `a`, angle `theta`.
fn single_loop_oracle(p: &GaussianCountParams) -> u64 {
    let r = (2.0 * p.y) as i64 + 1;
    let mut count = 0;
    for a in -r..=r {
        for b in -r..=r {
            let m = ((a * a + b * b) as f64).sqrt();
            if m < p.y || m > 2.0 * p.y {
                continue;
            }
            let th = (b as f64).atan2(a as f64);
            let d: f64 = (0..p.eta.len())
                .map(|i| {
                    let t = p.nu[i] as f64 * FRAC_PI_2 + p.eps[i][0] as f64 * th;
                    p.eta[i] as f64
                        * match p.sign {
                            Sign::Plus => t.cos(),
                            Sign::Minus => t.sin(),
                        }
                })
                .sum();
            if d.abs() > 1e-12 && d.abs() < p.y.powf(-p.delta) {
                count += 1;
            }
        }
    }
    count
}

#[test]
fn gaussian_count_single_factor() {
    for sign in [Sign::Plus, Sign::Minus] {
        for (eps, eta, nu) in [
            ([1i8, -1], [1i8, 1], [0u8, 1]),
            ([1, 1], [1, -1], [0, 2]),
            ([1, -1], [1, -1], [1, 3]),
            ([-1, 1], [1, 1], [0, 0]),
        ] {
            for delta in [0.1, 0.3, 0.5] {
                let p = GaussianCountParams {
                    y: 12.0,
                    k: 1,
                    eps: eps.iter().map(|&e| vec![e]).collect(),
                    eta: eta.to_vec(),
                    nu: nu.to_vec(),
                    sign,
                    delta,
                };
                assert_eq!(gaussian_count(&p, DEFAULT_WORK_LIMIT).unwrap(), single_loop_oracle(&p), "{p:?}");
            }
        }
    }
}

#[test]
fn gaussian_count_vanishes_for_tiny_threshold() {
    // every nonzero |d| / |a| is at least 1 / (2y), so y^-2 is below all of them
    let p = GaussianCountParams {
        y: 6.0,
        k: 2,
        eps: vec![vec![1, 1], vec![1, -1]],
        eta: vec![1, 1],
        nu: vec![0, 1],
        sign: Sign::Plus,
        delta: 2.0,
    };
    assert_eq!(gaussian_count(&p, DEFAULT_WORK_LIMIT).unwrap(), 0);
}

#[test]
fn gaussian_count_work_limit() {
    let p = GaussianCountParams {
        y: 20.0,
        k: 2,
        eps: vec![vec![1, 1]],
        eta: vec![1],
        nu: vec![1],
        sign: Sign::Plus,
        delta: 0.2,
    };
    assert!(matches!(gaussian_count(&p, 100), Err(Error::WorkLimit { .. })));
}

#[test]
fn gaussian_count_bound_constant_is_stable() {
    let mut ratios = Vec::new();
    for y in [4.0, 8.0, 16.0] {
        let p = GaussianCountParams {
            y,
            k: 2,
            eps: vec![vec![1, 1], vec![1, -1]],
            eta: vec![1, -1],
            nu: vec![0, 0],
            sign: Sign::Plus,
            delta: 0.3,
        };
        let c = gaussian_count(&p, DEFAULT_WORK_LIMIT).unwrap();
        ratios.push(gaussian_count_ratio(c, y, 2, 0.3));
    }
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    assert!(hi.is_finite() && hi < 10.0 * lo.max(1e-3), "{ratios:?}");
}

#[test]
fn report_combines_counts() {
    let r = correlation_report(65, 4, Some(3.0), 2, DEFAULT_WORK_LIMIT).unwrap();
    assert_eq!(r.spectral, r.diagonal);
    assert_eq!(r.spectral, 3 * 16 * 16 - 3 * 16);
    assert_eq!(r.quasi.unwrap().count, quasi_oracle(65, 4, 3.0));
}

use arw_core::field::*;
use arw_core::lattice::Eigenspace;
use arw_core::Error;
use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn space(n: u64) -> Eigenspace {
    Eigenspace::new(n).unwrap()
}

/// `r(z)` summed over every lattice point with complex exponentials.
fn r_oracle(n: u64, z: [f64; 2]) -> f64 {
    let e = space(n);
    e.points
        .iter()
        .map(|&(a, b)| (2.0 * PI * (a as f64 * z[0] + b as f64 * z[1])).cos())
        .sum::<f64>()
        / e.dim() as f64
}

#[test]
fn unit_variance() {
    let e = space(5);
    let x = [0.3, 0.7];
    let c = &empirical_covariance(&e, &[(x, x)], 5000, 1)[0];
    assert_eq!(c.exact, 1.0);
    assert!((c.empirical - 1.0).abs() < 3.0 * c.se, "{c:?}");
}

#[test]
fn covariance_matches_kernel() {
    let e = space(65);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pairs: Vec<_> = (0..10).map(|_| ([rng.gen(), rng.gen()], [rng.gen(), rng.gen()])).collect();
    for c in empirical_covariance(&e, &pairs, 5000, 2) {
        assert!((c.empirical - c.exact).abs() < 3.0 * c.se + 1e-12, "{c:?}");
    }
}

#[test]
fn sampling_is_deterministic() {
    let e = space(65);
    let a = WaveSample::sample(&e, 9, 3);
    let b = WaveSample::sample(&e, 9, 3);
    assert_eq!(a.xi, b.xi);
    assert_eq!(a.zeta, b.zeta);
    let c = WaveSample::sample(&e, 9, 4);
    assert_ne!(a.xi, c.xi);
}

#[test]
fn grid_matches_direct_sum() {
    let w = WaveSample::sample(&space(65), 1, 0);
    let g = 64;
    let grid = w.evaluate_grid(g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let (j, k) = (rng.gen_range(0..g), rng.gen_range(0..g));
        let direct = w.value_at([j as f64 / g as f64, k as f64 / g as f64]);
        assert!((grid[[j, k]] - direct).abs() < 1e-10);
    }
    assert!(grid.mean().unwrap().abs() < 1e-12);
}

#[test]
fn grid_refinement_is_exact() {
    let w = WaveSample::sample(&space(25), 2, 0);
    let coarse = w.evaluate_grid(24).unwrap();
    let fine = w.evaluate_grid(48).unwrap();
    for j in 0..24 {
        for k in 0..24 {
            assert!((coarse[[j, k]] - fine[[2 * j, 2 * k]]).abs() < 1e-10);
        }
    }
}

#[test]
fn grid_too_coarse() {
    let w = WaveSample::sample(&space(65), 1, 0);
    assert!(matches!(w.evaluate_grid(18), Err(Error::Invalid(_))));
    assert!(w.evaluate_grid(19).is_ok());
    assert!(grid_size(65, 1.0) >= 19);
}

#[test]
fn kernel_at_origin() {
    let k = CovarianceKernel::new(&space(65));
    let b = k.base([0.0, 0.0]);
    assert_eq!(b.r, 1.0);
    assert_eq!(b.d, [0.0, 0.0]);
    let half_e = k.energy / 2.0;
    assert!((b.h[0][0] + half_e).abs() < 1e-9 && (b.h[1][1] + half_e).abs() < 1e-9 && b.h[0][1].abs() < 1e-9);
    assert!(matches!(k.conditioned([0.0, 0.0]), Err(Error::SingularDisplacement(_))));
}

#[test]
fn kernel_hand_values() {
    let k = CovarianceKernel::new(&space(1));
    assert!(k.r([0.5, 0.0]).abs() < 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for n in [1u64, 5, 65, 1105] {
        let k = CovarianceKernel::new(&space(n));
        for _ in 0..10 {
            let z = [rng.gen(), rng.gen()];
            let b = k.base(z);
            assert!((k.r(z) - r_oracle(n, z)).abs() < 1e-12);
            assert!((b.r - k.r(z)).abs() < 1e-12);
            assert!((b.one_minus_r - (1.0 - b.r)).abs() < 1e-12);
            assert!((b.one_plus_r - (1.0 + b.r)).abs() < 1e-12);
        }
    }
}

#[test]
fn derivatives_match_finite_differences() {
    let k = CovarianceKernel::new(&space(65));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let err_at = |z: [f64; 2], h: f64| {
        let b = k.base(z);
        let shift = |i: usize, t: f64| {
            let mut w = z;
            w[i] += t;
            w
        };
        let mut err: f64 = 0.0;
        for i in 0..2 {
            let fd = (k.r(shift(i, h)) - k.r(shift(i, -h))) / (2.0 * h);
            err = err.max((fd - b.d[i]).abs() / k.energy.sqrt());
            let fd2 = (k.base(shift(i, h)).d[i] - k.base(shift(i, -h)).d[i]) / (2.0 * h);
            err = err.max((fd2 - b.h[i][i]).abs() / k.energy);
            let j = 1 - i;
            let fdx = (k.base(shift(j, h)).d[i] - k.base(shift(j, -h)).d[i]) / (2.0 * h);
            err = err.max((fdx - b.h[i][j]).abs() / k.energy);
        }
        err
    };
    for _ in 0..20 {
        let z = [rng.gen(), rng.gen()];
        let (e1, e2) = (err_at(z, 1e-4), err_at(z, 5e-5));
        assert!(e1 < 1e-5, "{e1}");
        // second order: halving h quarters the error
        assert!(e2 < 0.3 * e1 || e2 < 1e-9, "{e1} {e2}");
    }
}

#[test]
fn kernel_symmetries() {
    let k = CovarianceKernel::new(&space(325));
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let z: [f64; 2] = [rng.gen(), rng.gen()];
        assert!((k.r(z) - k.r([-z[0], -z[1]])).abs() < 1e-13);
        assert!((k.r(z) - k.r([-z[1], z[0]])).abs() < 1e-13);
        assert!(k.r(z).abs() <= 1.0 + 1e-12);
        if let Ok(b) = k.conditioned(z) {
            assert!(b.x[0][0] + b.x[1][1] <= 1e-15);
        }
    }
}

#[test]
fn independent_gradients_give_quarter() {
    let b = ConditionedBlocks {
        r: 0.0,
        x: [[0.0; 2]; 2],
        y: [[0.0; 2]; 2],
    };
    assert_eq!(k2_from_blocks(&b, K2Method::Taylor).unwrap().value, 0.25);
    assert!((k2_from_blocks(&b, K2Method::Quadrature).unwrap().value - 0.25).abs() < 1e-12);
    let mc = k2_from_blocks(&b, K2Method::GaussianMc { samples: 10_000, seed: 1 }).unwrap();
    // the control variate is exact at the identity
    assert!((mc.value - 0.25).abs() < 1e-12);
}

/// The second-order polynomial, written out with nalgebra matrices.
fn l2_oracle(b: &ConditionedBlocks) -> f64 {
    let m = |a: [[f64; 2]; 2]| Matrix2::new(a[0][0], a[0][1], a[1][0], a[1][1]);
    let (x, y, r) = (m(b.x), m(b.y), b.r);
    let y2 = y * y;
    let (tx, ty2) = (x.trace(), y2.trace());
    (r.powi(2) + tx + ty2 / 4.0 + 0.75 * r.powi(4) - (x * y2).trace() / 8.0 - (x * x).trace() / 16.0
        + (y2 * y2).trace() / 128.0
        + ty2.powi(2) / 256.0
        - tx * ty2 / 16.0
        + r.powi(2) * tx / 2.0
        + r.powi(2) * ty2 / 8.0)
        / 8.0
}

#[test]
fn second_order_polynomial() {
    // n = 1 at rational points where r, X and Y are exact
    let k = CovarianceKernel::new(&space(1));
    for z in [[0.125, 0.25], [1.0 / 3.0, 1.0 / 6.0], [0.2, 0.45]] {
        let b = k.conditioned(z).unwrap();
        let t = KernelTraces::of(&b);
        assert!((t.l2() - l2_oracle(&b)).abs() < 1e-14);
    }
    let k = CovarianceKernel::new(&space(65));
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let b = k.conditioned([rng.gen(), rng.gen()]).unwrap();
        assert!((KernelTraces::of(&b).l2() - l2_oracle(&b)).abs() < 1e-12);
    }
}

#[test]
fn taylor_requires_small_r() {
    let k = CovarianceKernel::new(&space(65));
    assert!(two_point_k2(&k, [0.01, 0.0], K2Method::Taylor).is_err());
}

#[test]
fn taylor_against_monte_carlo() {
    let k = CovarianceKernel::new(&space(65));
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut used = 0;
    while used < 30 {
        let z = [rng.gen(), rng.gen()];
        let b = k.conditioned(z).unwrap();
        if b.r.abs() >= 0.25 {
            continue;
        }
        used += 1;
        let t = KernelTraces::of(&b);
        let taylor = k2_from_blocks(&b, K2Method::Taylor).unwrap().value;
        let mc = k2_from_blocks(&b, K2Method::GaussianMc { samples: 1_000_000, seed: used }).unwrap();
        let quad = k2_from_blocks(&b, K2Method::Quadrature).unwrap().value;
        let se = mc.se.unwrap();
        let budget = 10.0 * (b.r.powi(6) + t.tr_x3.abs() + t.tr_y6.abs());
        assert!((taylor - mc.value).abs() <= 3.0 * se + budget, "z={z:?} {taylor} {} {se}", mc.value);
        assert!((quad - mc.value).abs() <= 4.0 * se, "z={z:?} {quad} {} {se}", mc.value);
        assert!((taylor - quad).abs() <= budget, "z={z:?} {taylor} {quad} {budget}");
    }
}

#[test]
fn quadrature_near_singular() {
    // K_2 sqrt(1 - r^2) stays bounded and tends to 1/(2 pi) at the origin
    let k = CovarianceKernel::new(&space(65));
    let mut prev: Option<f64> = None;
    for h in [1e-2, 5e-3, 2.5e-3] {
        let z = [h, 0.3 * h];
        let b = k.conditioned(z).unwrap();
        let base = k.base(z);
        let v = k2_from_blocks(&b, K2Method::Quadrature).unwrap().value * (base.one_minus_r * base.one_plus_r).sqrt();
        assert!(v.is_finite() && v > 0.0);
        if let Some(p) = prev {
            assert!(((v - p) / p).abs() < 0.05);
        }
        prev = Some(v);
    }
    assert!((prev.unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-3);
}

#[test]
fn omega_is_psd() {
    let k = CovarianceKernel::new(&space(65));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let b = k.conditioned([rng.gen(), rng.gen()]).unwrap();
        assert!(symmetric_sqrt(&b.omega()).is_ok());
    }
}

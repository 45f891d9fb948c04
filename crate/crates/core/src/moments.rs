//! Moments of the covariance kernel over the torus and over pairs of points
//! in a small ball.
//!
//! Fourier convention: `e(t) = exp(2 pi i t)`, so the transform of the disc of
//! radius `s` is `s J_1(2 pi s |xi|) / |xi|`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::Serialize;
use std::collections::HashSet;
use std::f64::consts::PI;

use crate::correlations::{diagonal_count, quasi_correlations, spectral_count};
use crate::field::{CovarianceKernel, KernelTraces};
use crate::lattice::{isqrt, Eigenspace, Point};
use crate::quad::PanelRule;
use crate::{invalid, Error};

/// Bessel function of the first kind, order one.
pub fn bessel_j1(x: f64) -> f64 {
    libm::j1(x)
}

/// Fourier transform of the indicator of the disc of radius `s`.
pub fn disc_ft(xi: [f64; 2], s: f64) -> f64 {
    let m = xi[0].hypot(xi[1]);
    if m == 0.0 {
        PI * s * s
    } else {
        s * bessel_j1(2.0 * PI * s * m) / m
    }
}

/// Area of the intersection of two discs of radius `s` at distance `d`.
pub fn lens_area(d: f64, s: f64) -> f64 {
    if d >= 2.0 * s {
        return 0.0;
    }
    2.0 * s * s * (d / (2.0 * s)).acos() - 0.5 * d * (4.0 * s * s - d * d).sqrt()
}

fn ceil_sqrt(n: u64) -> usize {
    let r = isqrt(n);
    (if r * r == n { r } else { r + 1 }) as usize
}

fn forward_2d(buf: &mut [Complex64], g: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(g)
    } else {
        planner.plan_fft_forward(g)
    };
    for row in buf.chunks_exact_mut(g) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); g];
    for k in 0..g {
        for j in 0..g {
            col[j] = buf[j * g + k];
        }
        fft.process(&mut col);
        for j in 0..g {
            buf[j * g + k] = col[j];
        }
    }
}

/// Multiset of `l`-fold ordered sums of the lattice points, as
/// `(sum, multiplicity)`, by an FFT power of the point indicator.
pub fn sum_distribution(points: &[Point], radius: i64, l: usize) -> Result<Vec<(Point, u64)>, Error> {
    let reach = l as i64 * radius;
    let g = (2 * reach + 1) as usize;
    if g * g > 1 << 26 {
        return invalid("sum distribution grid too large");
    }
    let wrap = |v: i64| v.rem_euclid(g as i64) as usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); g * g];
    for &(a, b) in points {
        buf[wrap(a) * g + wrap(b)] += 1.0;
    }
    forward_2d(&mut buf, g, false);
    for v in buf.iter_mut() {
        *v = v.powu(l as u32);
    }
    forward_2d(&mut buf, g, true);
    let norm = (g * g) as f64;
    let expected = (points.len() as f64).powi(l as i32);
    let mut out = Vec::new();
    let mut total = 0.0;
    for j in 0..g {
        for k in 0..g {
            let c = (buf[j * g + k].re / norm).round();
            if c > 0.0 {
                let x = if j as i64 > reach { j as i64 - g as i64 } else { j as i64 };
                let y = if k as i64 > reach { k as i64 - g as i64 } else { k as i64 };
                out.push(((x, y), c as u64));
                total += c;
            }
        }
    }
    if (total - expected).abs() > 0.5 {
        return Err(Error::Numerical(format!("sum distribution lost mass: {total} vs {expected}")));
    }
    Ok(out)
}

/// Torus moment of the covariance kernel, by exact enumeration and by
/// quadrature on a grid fine enough to be exact.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FullMoment {
    pub n: u64,
    pub l: usize,
    pub enumeration: f64,
    pub quadrature: f64,
}

pub fn full_moment(n: u64, l: usize) -> Result<FullMoment, Error> {
    let e = Eigenspace::new(n)?;
    let nn = e.dim() as f64;
    let enumeration = spectral_count(&e.points, l, crate::DEFAULT_WORK_LIMIT)? as f64 / nn.powi(l as i32);
    let g = 2 * l * ceil_sqrt(n) + 1;
    let wrap = |v: i64| v.rem_euclid(g as i64) as usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); g * g];
    for &(a, b) in &e.points {
        buf[wrap(a) * g + wrap(b)] += 1.0 / nn;
    }
    forward_2d(&mut buf, g, true);
    let quadrature = buf.iter().map(|v| v.re.powi(l as i32)).sum::<f64>() / (g * g) as f64;
    Ok(FullMoment {
        n,
        l,
        enumeration,
        quadrature,
    })
}

/// Integrates `f(z) * lens_area(|z|, s)` over `rho_min < |z| < rho_max <= 2s`.
///
/// Polar coordinates with `|z| = 2s (1 - u^2)` remove the endpoint
/// singularity of the lens weight. The radial rule is Gauss-Legendre on
/// panels shorter than a quarter wavelength; the angular rule is the
/// midpoint rule, which is spectrally accurate for periodic integrands.
/// With `dihedral`, `f` is assumed invariant under the symmetries of the
/// square and only the first octant is sampled.
#[derive(Clone, Copy, Debug)]
pub struct LensRule {
    pub s: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub radial_panels: usize,
    pub radial_order: usize,
    pub angular: usize,
    pub dihedral: bool,
}

impl LensRule {
    /// A rule resolving frequencies up to `bandwidth` (in cycles per unit length).
    pub fn for_bandwidth(s: f64, bandwidth: f64, rho_min: f64, dihedral: bool) -> Self {
        let radial_panels = (16.0 * s * bandwidth).ceil().max(4.0) as usize;
        let angular = ((2.0 * 2.0 * PI * 2.0 * s * bandwidth + 48.0) / 8.0).ceil() as usize * 8;
        LensRule {
            s,
            rho_min,
            rho_max: 2.0 * s,
            radial_panels,
            radial_order: 10,
            angular,
            dihedral,
        }
    }

    pub fn nodes(&self) -> Vec<([f64; 2], f64)> {
        let s = self.s;
        let u_of = |rho: f64| (1.0 - rho / (2.0 * s)).max(0.0).sqrt();
        let radial = PanelRule::new(u_of(self.rho_max), u_of(self.rho_min), self.radial_panels, self.radial_order);
        let (count, span, mult) = if self.dihedral {
            (self.angular / 8, PI / 4.0, 8.0)
        } else {
            (self.angular, 2.0 * PI, 1.0)
        };
        let h = span / count as f64;
        let mut out = Vec::with_capacity(radial.nodes.len() * count);
        for (&u, &wu) in radial.nodes.iter().zip(&radial.weights) {
            let rho = 2.0 * s * (1.0 - u * u);
            let jac = 4.0 * s * u * rho;
            let w_r = wu * jac * lens_area(rho, s);
            for m in 0..count {
                let phi = (m as f64 + 0.5) * h;
                out.push(([rho * phi.cos(), rho * phi.sin()], w_r * h * mult));
            }
        }
        out
    }

    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64 + Sync) -> f64 {
        use rayon::prelude::*;
        // summed in node order so the result does not depend on the thread count
        let terms: Vec<f64> = self.nodes().par_iter().map(|&(z, w)| w * f(z)).collect();
        terms.iter().sum()
    }
}

/// How a restricted moment is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MomentMethod {
    /// `N^-l sum |disc_ft(sum of tuple)|^2` over all `l`-tuples.
    BesselSum,
    /// `int r^l lens_area` over displacements.
    LensQuadrature,
}

/// `int int_{B(s) x B(s)} r(x - y)^l dx dy`.
pub fn restricted_moment(n: u64, l: usize, s: f64, method: MomentMethod) -> Result<f64, Error> {
    if !(s > 0.0 && s < 0.5) {
        return invalid("s must lie in (0, 1/2)");
    }
    let e = Eigenspace::new(n)?;
    match method {
        MomentMethod::BesselSum => {
            let nn = e.dim() as f64;
            let dist = sum_distribution(&e.points, isqrt(n) as i64, l)?;
            let sum: f64 = dist
                .iter()
                .map(|&((x, y), c)| c as f64 * disc_ft([x as f64, y as f64], s).powi(2))
                .sum();
            Ok(sum / nn.powi(l as i32))
        }
        MomentMethod::LensQuadrature => {
            let kernel = CovarianceKernel::new(&e);
            let rule = LensRule::for_bandwidth(s, l as f64 * (n as f64).sqrt(), 0.0, true);
            Ok(rule.integrate(|z| kernel.r(z).powi(l as i32)))
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct OscillatorySum {
    /// Sum of `|disc_ft|^2` over tuples with nonzero sum.
    pub lhs: f64,
    /// `s^4 (|C_n(l; K)| + N^l / (K s)^3)`.
    pub bound: f64,
    pub quasi_count: u64,
}

pub fn oscillatory_sum(n: u64, l: usize, s: f64, k: f64) -> Result<OscillatorySum, Error> {
    if !(s > 0.0 && k > 0.0) {
        return invalid("s and K must be positive");
    }
    let e = Eigenspace::new(n)?;
    let dist = sum_distribution(&e.points, isqrt(n) as i64, l)?;
    let lhs = dist
        .iter()
        .filter(|&&((x, y), _)| (x, y) != (0, 0))
        .map(|&((x, y), c)| c as f64 * disc_ft([x as f64, y as f64], s).powi(2))
        .sum();
    let q = quasi_correlations(n, l, k, 0, crate::DEFAULT_WORK_LIMIT)?;
    let nl = (e.dim() as f64).powi(l as i32);
    Ok(OscillatorySum {
        lhs,
        bound: s.powi(4) * (q.count as f64 + nl / (k * s).powi(3)),
        quasi_count: q.count,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentEntry {
    pub name: String,
    /// Integral over `B(s) x B(s)`.
    pub numeric: f64,
    /// Part of `numeric` coming from displacements with `|r|` above the singular threshold.
    pub singular_part: f64,
    /// Leading-order prediction, already multiplied by `(pi s^2)^2`.
    pub predicted_leading: f64,
    /// `numeric / predicted - 1` when the prediction is nonzero.
    pub rel_dev: Option<f64>,
    pub method: MomentMethod,
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentReport {
    pub n: u64,
    pub s: f64,
    pub dim: usize,
    pub tau4: f64,
    pub entries: Vec<MomentEntry>,
    /// `(pi s^2)^2 (1 + tau4^2) / (256 N^2)`: the predicted integral of the
    /// second-order part of the two-point function.
    pub predicted_l2_integral: f64,
}

/// Default singular threshold on `|r|`.
pub const SINGULAR_THRESHOLD: f64 = 7.0 / 8.0;

/// Integrals of the kernel quantities entering the second-order expansion of
/// the two-point function, next to their leading-order predictions.
pub fn moment_suite(n: u64, s: f64) -> Result<MomentReport, Error> {
    if !(s > 0.0 && s < 0.5) {
        return invalid("s must lie in (0, 1/2)");
    }
    let e = Eigenspace::new(n)?;
    let kernel = CovarianceKernel::new(&e);
    let nn = e.dim() as f64;
    let tau = e.tau_hat(4);
    let t2 = tau * tau;
    let area2 = (PI * s * s).powi(2);
    let s6 = spectral_count(&e.points, 6, crate::DEFAULT_WORK_LIMIT)? as f64 / nn.powi(6);
    let n2 = nn * nn;
    type Quantity = fn(&KernelTraces) -> f64;
    let table: [(&str, Quantity, f64); 14] = [
        ("r^2", |t| t.r.powi(2), 1.0 / nn),
        ("r^4", |t| t.r.powi(4), diagonal_count(e.dim(), 4) as f64 / nn.powi(4)),
        ("r^6", |t| t.r.powi(6), s6),
        ("tr X", |t| t.tr_x, -2.0 / nn - 2.0 / n2),
        ("tr Y^2", |t| t.tr_y2, 4.0 / nn - 4.0 / n2),
        ("tr XY^2", |t| t.tr_xy2, -4.0 / n2),
        ("tr X^2", |t| t.tr_x2, 8.0 / n2),
        ("tr Y^4", |t| t.tr_y4, 2.0 * (11.0 + t2) / n2),
        ("(tr Y^2)^2", |t| t.tr_y2 * t.tr_y2, 4.0 * (7.0 + t2) / n2),
        ("tr X tr Y^2", |t| t.tr_x * t.tr_y2, -8.0 / n2),
        ("r^2 tr X", |t| t.r * t.r * t.tr_x, -2.0 / n2),
        ("r^2 tr Y^2", |t| t.r * t.r * t.tr_y2, 8.0 / n2),
        ("tr X^3", |t| t.tr_x3, 0.0),
        ("tr Y^6", |t| t.tr_y6, 0.0),
    ];
    let rule = LensRule::for_bandwidth(s, 8.0 * (n as f64).sqrt(), 0.0, true);
    let nodes = rule.nodes();
    let mut totals = vec![0.0; table.len()];
    let mut singular = vec![0.0; table.len()];
    for (z, w) in nodes {
        let Ok(b) = kernel.conditioned(z) else { continue };
        let t = KernelTraces::of(&b);
        let sing = t.r.abs() > SINGULAR_THRESHOLD;
        for (i, (_, f, _)) in table.iter().enumerate() {
            let v = w * f(&t);
            totals[i] += v;
            if sing {
                singular[i] += v;
            }
        }
    }
    let mut entries: Vec<MomentEntry> = table
        .iter()
        .enumerate()
        .map(|(i, &(name, _, pred))| {
            let predicted_leading = area2 * pred;
            MomentEntry {
                name: name.to_string(),
                numeric: totals[i],
                singular_part: singular[i],
                predicted_leading,
                rel_dev: (predicted_leading != 0.0).then(|| totals[i] / predicted_leading - 1.0),
                method: MomentMethod::LensQuadrature,
            }
        })
        .collect();
    for (l, pred) in [(2, 1.0 / nn), (4, diagonal_count(e.dim(), 4) as f64 / nn.powi(4)), (6, s6)] {
        let numeric = restricted_moment(n, l, s, MomentMethod::BesselSum)?;
        entries.push(MomentEntry {
            name: format!("R({l}; s)"),
            numeric,
            singular_part: 0.0,
            predicted_leading: area2 * pred,
            rel_dev: Some(numeric / (area2 * pred) - 1.0),
            method: MomentMethod::BesselSum,
        });
    }
    Ok(MomentReport {
        n,
        s,
        dim: e.dim(),
        tau4: tau,
        entries,
        predicted_l2_integral: area2 * (1.0 + t2) / (256.0 * n2),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SingularPartition {
    pub n: u64,
    pub s: f64,
    pub c0: f64,
    /// Cubes have side `1/F`, `F = ceil(sqrt(n) / c0)`.
    pub f: u64,
    pub cube_side: f64,
    pub threshold: f64,
    pub singular_cubes: u64,
    pub total_cubes: u64,
    pub covered_measure: f64,
    /// Every cube of the cover lies inside `B(2s) x B(2s)`.
    pub within_double_ball: bool,
    /// Monte Carlo measure of `{|r(x - y)| > threshold}` in `B(s) x B(s)`.
    pub mc_measure: f64,
    pub mc_se: f64,
    pub spot_checks: usize,
    pub spot_passed: usize,
    pub spot_min_abs_r: f64,
}

/// Covers `B(s) x B(s)` by products of grid squares of side `1/F` and marks a
/// cube singular when `|r|` at its centre displacement exceeds
/// `threshold - Lip * rho`, with `Lip = 2 pi sqrt(n)` bounding `|grad r|` and
/// `rho = sqrt(2)/F` the largest distance from the centre displacement.
pub fn singular_partition(n: u64, s: f64, c0: f64, threshold: f64, seed: u64) -> Result<SingularPartition, Error> {
    if !(s > 0.0 && s < 0.5 && c0 > 0.0 && threshold > 0.0 && threshold < 1.0) {
        return invalid("need 0 < s < 1/2, c0 > 0 and 0 < threshold < 1");
    }
    let e = Eigenspace::new(n)?;
    let kernel = CovarianceKernel::new(&e);
    let f = ((n as f64).sqrt() / c0).ceil() as i64;
    let ff = f as f64;
    let m = (s * ff).ceil() as i64 + 1;
    // squares [i/F, (i+1)/F] x [j/F, (j+1)/F] meeting the open disc of radius s
    let near = |i: i64| {
        let (lo, hi) = (i as f64 / ff, (i + 1) as f64 / ff);
        if hi < 0.0 {
            hi
        } else if lo > 0.0 {
            lo
        } else {
            0.0
        }
    };
    let far = |i: i64| (i as f64 / ff).abs().max(((i + 1) as f64 / ff).abs());
    let squares: Vec<(i64, i64)> = (-m..m)
        .flat_map(|i| (-m..m).map(move |j| (i, j)))
        .filter(|&(i, j)| near(i).hypot(near(j)) < s)
        .collect();
    if squares.len() > 4_000_000 {
        return invalid("partition too fine; increase c0");
    }
    let within_double_ball = squares.iter().all(|&(i, j)| far(i).hypot(far(j)) <= 2.0 * s);
    // pair counts per offset p - q by FFT autocorrelation
    let g = (4 * m + 2) as usize;
    let wrap = |v: i64| v.rem_euclid(g as i64) as usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); g * g];
    for &(i, j) in &squares {
        buf[wrap(i) * g + wrap(j)] = Complex64::new(1.0, 0.0);
    }
    forward_2d(&mut buf, g, false);
    for v in buf.iter_mut() {
        *v = Complex64::new(v.norm_sqr(), 0.0);
    }
    forward_2d(&mut buf, g, true);
    let lip = 2.0 * PI * (n as f64).sqrt();
    let rho = 2f64.sqrt() / ff;
    let cut = threshold - lip * rho;
    let mut singular_cubes = 0u64;
    let mut singular_offsets: Vec<((i64, i64), u64)> = Vec::new();
    for dj in -2 * m..=2 * m {
        for dk in -2 * m..=2 * m {
            let c = (buf[wrap(dj) * g + wrap(dk)].re / (g * g) as f64).round() as u64;
            if c == 0 {
                continue;
            }
            if kernel.r([dj as f64 / ff, dk as f64 / ff]).abs() > cut {
                singular_cubes += c;
                singular_offsets.push(((dj, dk), c));
            }
        }
    }
    let total_cubes = (squares.len() as u64).pow(2);
    let covered_measure = singular_cubes as f64 / ff.powi(4);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let in_disc = |rng: &mut ChaCha8Rng| loop {
        let p = [rng.gen_range(-s..s), rng.gen_range(-s..s)];
        if p[0].hypot(p[1]) < s {
            return p;
        }
    };
    let draws = 100_000;
    let mut hits = 0u64;
    for _ in 0..draws {
        let (x, y) = (in_disc(&mut rng), in_disc(&mut rng));
        if kernel.r([x[0] - y[0], x[1] - y[1]]).abs() > threshold {
            hits += 1;
        }
    }
    let area2 = (PI * s * s).powi(2);
    let p_hat = hits as f64 / draws as f64;
    let mc_measure = area2 * p_hat;
    let mc_se = area2 * (p_hat * (1.0 - p_hat) / draws as f64).sqrt();

    let square_set: HashSet<(i64, i64)> = squares.iter().copied().collect();
    let (mut spot_checks, mut spot_passed, mut spot_min_abs_r) = (0, 0, f64::INFINITY);
    if singular_cubes > 0 {
        for _ in 0..100 {
            let mut pick = rng.gen_range(0..singular_cubes);
            let &((dj, dk), _) = singular_offsets
                .iter()
                .find(|&&(_, c)| {
                    if pick < c {
                        true
                    } else {
                        pick -= c;
                        false
                    }
                })
                .expect("weighted pick within total");
            let partners: Vec<&(i64, i64)> = squares
                .iter()
                .filter(|&&(i, j)| square_set.contains(&(i - dj, j - dk)))
                .collect();
            let &(pi_, pj) = partners[rng.gen_range(0..partners.len())];
            let (qi, qj) = (pi_ - dj, pj - dk);
            let mut min_r = f64::INFINITY;
            for _ in 0..16 {
                let x = [(pi_ as f64 + rng.gen::<f64>()) / ff, (pj as f64 + rng.gen::<f64>()) / ff];
                let y = [(qi as f64 + rng.gen::<f64>()) / ff, (qj as f64 + rng.gen::<f64>()) / ff];
                min_r = min_r.min(kernel.r([x[0] - y[0], x[1] - y[1]]).abs());
            }
            spot_checks += 1;
            if min_r > 0.5 {
                spot_passed += 1;
            }
            spot_min_abs_r = spot_min_abs_r.min(min_r);
        }
    }
    Ok(SingularPartition {
        n,
        s,
        c0,
        f: f as u64,
        cube_side: 1.0 / ff,
        threshold,
        singular_cubes,
        total_cubes,
        covered_measure,
        within_double_ball,
        mc_measure,
        mc_se,
        spot_checks,
        spot_passed,
        spot_min_abs_r,
    })
}

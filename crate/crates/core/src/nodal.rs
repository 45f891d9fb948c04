//! Nodal length of sampled eigenfunctions, its Monte Carlo statistics, the
//! Kac-Rice variance integral, and the limiting law of the normalised length.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::field::{grid_size, k2_from_blocks, CovarianceKernel, K2Method, WaveSample};
use crate::lattice::Eigenspace;
use crate::moments::LensRule;
use crate::{invalid, Error};

/// Value substituted for exact zeros at grid nodes.
pub const ZERO_NUDGE: f64 = 1e-14;

/// A disc of the torus.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Ball {
    pub center: [f64; 2],
    pub s: f64,
}

impl Ball {
    pub fn centred(s: f64) -> Self {
        Ball {
            center: [0.5, 0.5],
            s,
        }
    }

    /// Length of the part of segment `p q` inside the ball, taken as a subset
    /// of the torus. Segments are assumed shorter than `1/2`; for `s >= 1/2`
    /// the images of the disc overlap and their union is used.
    pub fn clip(&self, p: [f64; 2], q: [f64; 2]) -> f64 {
        let mid = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
        let base = [(self.center[0] - mid[0]).round(), (self.center[1] - mid[1]).round()];
        let d = [q[0] - p[0], q[1] - p[1]];
        let dd = d[0] * d[0] + d[1] * d[1];
        if dd == 0.0 {
            return 0.0;
        }
        let reach = if self.s < 0.5 { 0 } else { 1 };
        let mut pieces: Vec<(f64, f64)> = Vec::new();
        for i in -reach..=reach {
            for j in -reach..=reach {
                let a = [
                    p[0] + base[0] + i as f64 - self.center[0],
                    p[1] + base[1] + j as f64 - self.center[1],
                ];
                let ad = a[0] * d[0] + a[1] * d[1];
                let aa = a[0] * a[0] + a[1] * a[1] - self.s * self.s;
                let disc = ad * ad - dd * aa;
                if disc <= 0.0 {
                    continue;
                }
                let root = disc.sqrt();
                let t0 = ((-ad - root) / dd).max(0.0);
                let t1 = ((-ad + root) / dd).min(1.0);
                if t1 > t0 {
                    pieces.push((t0, t1));
                }
            }
        }
        pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
        let (mut covered, mut end) = (0.0, 0.0f64);
        for (t0, t1) in pieces {
            let start = t0.max(end);
            if t1 > start {
                covered += t1 - start;
                end = t1;
            }
        }
        covered * dd.sqrt()
    }
}

/// Nodal lengths over the whole torus and inside an optional ball.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct ContourLengths {
    pub full: f64,
    pub restricted: f64,
    /// Grid values that were exactly zero and nudged positive.
    pub nudged: usize,
}

/// Zero-level segments of a periodic grid `values[[j, k]] = f(j/G, k/G)`,
/// by marching squares with linear interpolation. Saddle cells are resolved
/// by the sign of the mean of the four corners.
pub fn nodal_segments(values: &Array2<f64>) -> Vec<[[f64; 2]; 2]> {
    let mut out = Vec::new();
    march(values, |p, q| out.push([p, q]));
    out
}

fn march(values: &Array2<f64>, mut emit: impl FnMut([f64; 2], [f64; 2])) -> usize {
    let g = values.nrows();
    assert_eq!(g, values.ncols(), "grid must be square");
    let h = 1.0 / g as f64;
    let mut nudged = 0;
    let at = |j: usize, k: usize| values[[j % g, k % g]];
    for j in 0..g {
        for k in 0..g {
            // corners counter-clockwise from (j, k)
            let mut v = [at(j, k), at(j + 1, k), at(j + 1, k + 1), at(j, k + 1)];
            for x in v.iter_mut() {
                if *x == 0.0 {
                    *x = ZERO_NUDGE;
                    nudged += 1;
                }
            }
            let pos = v.map(|x| x > 0.0);
            if pos.iter().all(|&b| b == pos[0]) {
                continue;
            }
            let corner = |i: usize| match i {
                0 => [j as f64 * h, k as f64 * h],
                1 => [(j + 1) as f64 * h, k as f64 * h],
                2 => [(j + 1) as f64 * h, (k + 1) as f64 * h],
                _ => [j as f64 * h, (k + 1) as f64 * h],
            };
            // crossing on edge e joins corners e and e + 1
            let cross = |e: usize| {
                let (a, b) = (e, (e + 1) % 4);
                let t = v[a] / (v[a] - v[b]);
                let (p, q) = (corner(a), corner(b));
                [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
            };
            let edges: Vec<usize> = (0..4).filter(|&e| pos[e] != pos[(e + 1) % 4]).collect();
            if edges.len() == 2 {
                emit(cross(edges[0]), cross(edges[1]));
            } else {
                let centre_pos = v.iter().sum::<f64>() > 0.0;
                if centre_pos == pos[0] {
                    // corners 1 and 3 are cut off
                    emit(cross(0), cross(1));
                    emit(cross(2), cross(3));
                } else {
                    emit(cross(3), cross(0));
                    emit(cross(1), cross(2));
                }
            }
        }
    }
    nudged
}

/// Full and restricted nodal lengths of a periodic grid in one pass.
pub fn contour_lengths(values: &Array2<f64>, ball: Option<Ball>) -> ContourLengths {
    let mut full = 0.0;
    let mut restricted = 0.0;
    let nudged = march(values, |p, q| {
        full += (q[0] - p[0]).hypot(q[1] - p[1]);
        if let Some(b) = ball {
            restricted += b.clip(p, q);
        }
    });
    ContourLengths {
        full,
        restricted,
        nudged,
    }
}

/// Where the nodal length is measured.
#[derive(Clone, Copy, Debug, Serialize)]
pub enum Domain {
    Full,
    Ball(Ball),
}

/// Largest admissible ball radius: half the diagonal of the unit cell, at
/// which the ball covers the whole torus.
pub const MAX_BALL_RADIUS: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn check_ball(b: &Ball) -> Result<(), Error> {
    if !(b.s > 0.0 && b.s < MAX_BALL_RADIUS) {
        return invalid(format!("ball radius must lie in (0, sqrt(2)/2), got {}", b.s));
    }
    Ok(())
}

/// Nodal length of one realisation sampled at `points_per_wavelength`.
pub fn nodal_length(w: &WaveSample, domain: Domain, points_per_wavelength: f64) -> Result<f64, Error> {
    let ball = match domain {
        Domain::Full => None,
        Domain::Ball(b) => {
            check_ball(&b)?;
            Some(b)
        }
    };
    let values = w.evaluate_grid(grid_size(w.n, points_per_wavelength))?;
    let c = contour_lengths(&values, ball);
    Ok(if ball.is_some() { c.restricted } else { c.full })
}

/// Mean nodal length of the whole torus, `sqrt(E) / (2 sqrt 2)`.
pub fn expected_length(n: u64) -> f64 {
    PI * (n as f64 / 2.0).sqrt()
}

/// Leading constant of the length variance, `(1 + tau^2) / 512`.
pub fn variance_constant(tau4: f64) -> f64 {
    (1.0 + tau4 * tau4) / 512.0
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub se: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NodalStats {
    pub n: u64,
    pub s: f64,
    pub trials: usize,
    pub grid: usize,
    pub seed: u64,
    pub tau4: f64,
    pub mean_full: f64,
    pub mean_restricted: f64,
    pub expected_full: f64,
    pub expected_restricted: f64,
    pub var_full: f64,
    pub var_restricted: f64,
    pub cov: f64,
    pub corr: f64,
    /// `cov - pi s^2 var_full`, zero in expectation.
    pub identity_residual: f64,
    pub ci_var_full: Interval,
    pub ci_var_restricted: Interval,
    pub ci_cov: Interval,
    pub ci_corr: Interval,
    pub ci_identity_residual: Interval,
    /// `(full, restricted)` per trial.
    pub samples: Vec<(f64, f64)>,
}

struct Moments {
    var_full: f64,
    var_restricted: f64,
    cov: f64,
    corr: f64,
    residual: f64,
}

fn moments_of(samples: &[(f64, f64)], idx: impl Iterator<Item = usize> + Clone, area: f64) -> Moments {
    let m = idx.clone().count() as f64;
    let (sa, sb) = idx.clone().fold((0.0, 0.0), |(a, b), i| (a + samples[i].0, b + samples[i].1));
    let (ma, mb) = (sa / m, sb / m);
    let (mut vaa, mut vbb, mut vab) = (0.0, 0.0, 0.0);
    for i in idx {
        let (da, db) = (samples[i].0 - ma, samples[i].1 - mb);
        vaa += da * da;
        vbb += db * db;
        vab += da * db;
    }
    let (vaa, vbb, vab) = (vaa / (m - 1.0), vbb / (m - 1.0), vab / (m - 1.0));
    Moments {
        var_full: vaa,
        var_restricted: vbb,
        cov: vab,
        corr: vab / (vaa * vbb).sqrt(),
        residual: vab - area * vaa,
    }
}

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

fn interval(mut xs: Vec<f64>) -> Interval {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let se = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    xs.sort_by(f64::total_cmp);
    let q = |p: f64| xs[((p * (m - 1.0)).round() as usize).min(xs.len() - 1)];
    Interval {
        lo: q(0.025),
        hi: q(0.975),
        se,
    }
}

/// Paired full and restricted lengths over independent realisations, with
/// percentile bootstrap intervals.
pub fn monte_carlo(n: u64, s: f64, trials: usize, seed: u64, points_per_wavelength: f64) -> Result<NodalStats, Error> {
    let ball = Ball::centred(s);
    check_ball(&ball)?;
    if trials < 2 {
        return invalid("need at least two trials");
    }
    let space = Eigenspace::new(n)?;
    let g = grid_size(n, points_per_wavelength);
    let samples: Vec<(f64, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let w = WaveSample::sample(&space, seed, t);
            let values = w.evaluate_grid(g)?;
            let c = contour_lengths(&values, Some(ball));
            Ok((c.full, c.restricted))
        })
        .collect::<Result<_, Error>>()?;
    let area = PI * s * s;
    let all = moments_of(&samples, 0..trials, area);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb007_5742);
    let boots: Vec<Moments> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let idx: Vec<usize> = (0..trials).map(|_| rng.gen_range(0..trials)).collect();
            moments_of(&samples, idx.into_iter(), area)
        })
        .collect();
    let pick = |f: fn(&Moments) -> f64| interval(boots.iter().map(f).collect());
    let m = trials as f64;
    let mean_full = samples.iter().map(|x| x.0).sum::<f64>() / m;
    let mean_restricted = samples.iter().map(|x| x.1).sum::<f64>() / m;
    Ok(NodalStats {
        n,
        s,
        trials,
        grid: g,
        seed,
        tau4: space.tau_hat(4),
        mean_full,
        mean_restricted,
        expected_full: expected_length(n),
        expected_restricted: area * expected_length(n),
        var_full: all.var_full,
        var_restricted: all.var_restricted,
        cov: all.cov,
        corr: all.corr,
        identity_residual: all.residual,
        ci_var_full: pick(|b| b.var_full),
        ci_var_restricted: pick(|b| b.var_restricted),
        ci_cov: pick(|b| b.cov),
        ci_corr: pick(|b| b.corr),
        ci_identity_residual: pick(|b| b.residual),
        samples,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KacRiceBracket {
    pub n: u64,
    pub s: f64,
    /// Radius of the excised disc around zero displacement.
    pub h0: f64,
    /// Contribution of displacements outside the excised disc.
    pub nonsingular: f64,
    /// Largest change when the radial or angular node count is reduced.
    pub quadrature_delta: f64,
    /// Range of `K_2 sqrt(1 - r^2)` sampled on the excised disc.
    pub envelope_lo: f64,
    pub envelope_hi: f64,
    pub singular_lower: f64,
    pub singular_upper: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Kac-Rice variance of the nodal length inside `B(s)`:
/// `(E/2) int (K_2(z) - 1/4) lens_area(|z|, s) dz`.
///
/// Outside the disc `|z| < h0` the two-point function is evaluated by
/// deterministic quadrature. Inside, `K_2 sqrt(1 - r^2)` stays bounded, and
/// the contribution is bracketed using the smallest and largest sampled
/// values of that product.
pub fn kac_rice_variance(n: u64, s: f64, h0: Option<f64>) -> Result<KacRiceBracket, Error> {
    if !(s > 0.0 && s < 0.5) {
        return invalid("s must lie in (0, 1/2)");
    }
    let space = Eigenspace::new(n)?;
    let kernel = CovarianceKernel::new(&space);
    let root = (n as f64).sqrt();
    let h0 = h0.unwrap_or(0.01 / root);
    if !(h0 > 0.0 && h0 < 2.0 * s) {
        return invalid("h0 must lie in (0, 2s)");
    }
    // other displacements where |r| = 1 must stay outside the lens support
    for z in [[0.5f64, 0.0], [0.0, 0.5], [0.5, 0.5]] {
        if z[0].hypot(z[1]) < 2.0 * s && kernel.r(z).abs() > 1.0 - 1e-9 {
            return invalid(format!("|r| = 1 at {z:?}, inside the support of radius 2s"));
        }
    }
    let half_energy = space.energy() / 2.0;
    let integrand = |z: [f64; 2]| -> f64 {
        match kernel.conditioned(z) {
            Ok(b) => k2_from_blocks(&b, K2Method::Quadrature).map(|v| v.value - 0.25).unwrap_or(f64::NAN),
            Err(_) => f64::NAN,
        }
    };
    let base = LensRule::for_bandwidth(s, 2.0 * root, h0, true);
    let fine = LensRule {
        angular: base.angular * 2,
        ..base
    };
    let nonsingular = half_energy * fine.integrate(integrand);
    if !nonsingular.is_finite() {
        return Err(Error::Numerical("near-singular displacement outside the excised disc".into()));
    }
    let fewer_radial = LensRule {
        radial_panels: (fine.radial_panels * 3).div_ceil(4),
        ..fine
    };
    let quadrature_delta = [base, fewer_radial]
        .iter()
        .map(|rule| (half_energy * rule.integrate(integrand) - nonsingular).abs())
        .fold(0.0, f64::max);

    let (mut envelope_lo, mut envelope_hi) = (f64::INFINITY, 0.0f64);
    for i in 1..=16 {
        let rho = h0 * i as f64 / 16.0;
        for m in 0..8 {
            let phi = (m as f64 + 0.5) * PI / 32.0;
            let z = [rho * phi.cos(), rho * phi.sin()];
            let b = kernel.base(z);
            let k2 = k2_from_blocks(&kernel.conditioned(z)?, K2Method::Quadrature)?.value;
            let c = k2 * (b.one_minus_r * b.one_plus_r).sqrt();
            envelope_lo = envelope_lo.min(c);
            envelope_hi = envelope_hi.max(c);
        }
    }
    let inner = LensRule {
        rho_min: 0.0,
        rho_max: h0,
        radial_panels: 4,
        ..base
    };
    let envelope = |c: f64| {
        half_energy
            * inner.integrate(|z| {
                let b = kernel.base(z);
                c / (b.one_minus_r * b.one_plus_r).sqrt() - 0.25
            })
    };
    let singular_lower = envelope(envelope_lo);
    let singular_upper = envelope(envelope_hi);
    Ok(KacRiceBracket {
        n,
        s,
        h0,
        nonsingular,
        quadrature_delta,
        envelope_lo,
        envelope_hi,
        singular_lower,
        singular_upper,
        lower: nonsingular + singular_lower - quadrature_delta,
        upper: nonsingular + singular_upper + quadrature_delta,
    })
}

/// `(2 - (1 + eta) x1^2 - (1 - eta) x2^2) / sqrt(1 + eta^2)`: mean zero,
/// variance four.
pub fn m_eta_value(eta: f64, x1: f64, x2: f64) -> f64 {
    (2.0 - (1.0 + eta) * x1 * x1 - (1.0 - eta) * x2 * x2) / (1.0 + eta * eta).sqrt()
}

pub fn m_eta_samples(eta: f64, count: usize, seed: u64) -> Result<Vec<f64>, Error> {
    if !(0.0..=1.0).contains(&eta) {
        return invalid("eta must lie in [0, 1]");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let x1: f64 = StandardNormal.sample(&mut rng);
            let x2: f64 = StandardNormal.sample(&mut rng);
            m_eta_value(eta, x1, x2)
        })
        .collect())
}

fn standardised(xs: &[f64]) -> Vec<f64> {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    let mut out: Vec<f64> = xs.iter().map(|x| (x - mean) / sd).collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Wasserstein-1 distance between two equal-size samples after standardising each.
pub fn standardised_w1(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (standardised(a), standardised(b));
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Consistent,
    Rejected,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DistributionComparison {
    pub eta: f64,
    pub samples: usize,
    pub w1: f64,
    /// 95th percentile of the distance between two samples of the limit law.
    pub null_p95: f64,
    pub verdict: Verdict,
}

pub const NULL_REPLICATES: usize = 200;

/// Compares standardised lengths with the limit law `M_eta`.
pub fn distribution_compare(lengths: &[f64], eta: f64, seed: u64) -> Result<DistributionComparison, Error> {
    let m = lengths.len();
    if m < 10 {
        return invalid("need at least ten lengths");
    }
    let reference = m_eta_samples(eta, m, seed)?;
    let w1 = standardised_w1(lengths, &reference);
    let mut null: Vec<f64> = (0..NULL_REPLICATES as u64)
        .into_par_iter()
        .map(|i| {
            let a = m_eta_samples(eta, m, seed.wrapping_add(2 * i + 1))?;
            let b = m_eta_samples(eta, m, seed.wrapping_add(2 * i + 2))?;
            Ok(standardised_w1(&a, &b))
        })
        .collect::<Result<_, Error>>()?;
    null.sort_by(f64::total_cmp);
    let null_p95 = null[(0.95 * (NULL_REPLICATES - 1) as f64).round() as usize];
    Ok(DistributionComparison {
        eta,
        samples: m,
        w1,
        null_p95,
        verdict: if w1 <= null_p95 {
            Verdict::Consistent
        } else {
            Verdict::Rejected
        },
    })
}

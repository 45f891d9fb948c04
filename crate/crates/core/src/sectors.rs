//! Gaussian primes in angular sectors, and lattice sets whose normalised
//! points approximate the four-arc measure.

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::lattice::{circle_w1, AngularMeasure, Eigenspace};
use crate::quad::adaptive;
use crate::{invalid, Error};

/// Largest sector radius accepted by [`gaussian_primes_in_sector`].
pub const MAX_SECTOR_RADIUS: f64 = 1e5;

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    r
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in BASES {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GaussianPrime {
    pub re: i64,
    pub im: i64,
    pub norm: u64,
    pub angle: f64,
}

impl GaussianPrime {
    pub fn modulus(&self) -> f64 {
        (self.norm as f64).sqrt()
    }
}

/// Lattice points with `a, b >= 0`, norm at most `r^2`, prime norm, and angle in
/// `(lo, hi)` (or `[lo, hi]` when `closed`), sorted by norm then angle.
fn primes_in_arc(r: f64, lo: f64, hi: f64, closed: bool) -> Vec<GaussianPrime> {
    let r2 = (r * r).floor() as u64;
    let amax = r.floor() as i64;
    let inside = |t: f64| if closed { t >= lo && t <= hi } else { t > lo && t < hi };
    let mut out: Vec<GaussianPrime> = (1..=amax)
        .into_par_iter()
        .flat_map_iter(|a| {
            let bmax_disc = (((r2 - (a * a) as u64) as f64).sqrt()) as i64;
            let b_lo = ((a as f64 * lo.tan()).floor() as i64 - 1).max(0);
            let b_hi = if hi >= FRAC_PI_2 {
                bmax_disc
            } else {
                ((a as f64 * hi.tan()).ceil() as i64 + 1).min(bmax_disc)
            };
            (b_lo..=b_hi).filter_map(move |b| {
                let norm = (a * a + b * b) as u64;
                if norm > r2 {
                    return None;
                }
                let angle = (b as f64).atan2(a as f64);
                (inside(angle) && is_prime(norm)).then_some(GaussianPrime {
                    re: a,
                    im: b,
                    norm,
                    angle,
                })
            })
        })
        .collect();
    out.sort_by(|p, q| p.norm.cmp(&q.norm).then(p.angle.total_cmp(&q.angle)));
    out
}

/// First-quadrant Gaussian primes of modulus at most `r` with angle strictly
/// inside `(alpha, beta)`. Inert primes lie on the axes and never qualify.
pub fn gaussian_primes_in_sector(r: f64, alpha: f64, beta: f64) -> Result<Vec<GaussianPrime>, Error> {
    if !(r > 0.0 && r <= MAX_SECTOR_RADIUS) {
        return invalid(format!("radius must lie in (0, {MAX_SECTOR_RADIUS}]"));
    }
    if !(0.0 <= alpha && alpha < beta && beta <= FRAC_PI_2) {
        return invalid("need 0 <= alpha < beta <= pi/2");
    }
    Ok(primes_in_arc(r, alpha, beta, false))
}

/// Target angle intervals `[a_j, a_j (1 + 1/k^2)]` with `a_j = s 2^j / 2^k`.
pub fn nu_intervals(s: f64, k: usize) -> Result<Vec<(f64, f64)>, Error> {
    if k == 0 {
        return invalid("k must be positive");
    }
    if !(s > 0.0 && s <= FRAC_PI_4) {
        return invalid("s must lie in (0, pi/4]");
    }
    let stretch = 1.0 + 1.0 / (k * k) as f64;
    Ok((0..k)
        .map(|j| {
            let a = s * 2f64.powi(j as i32) / 2f64.powi(k as i32);
            (a, a * stretch)
        })
        .collect())
}

/// All `2^k` signed sums `sum_j (+-) theta_j`, ascending.
pub fn signed_sums(thetas: &[f64]) -> Vec<f64> {
    let k = thetas.len();
    let mut out: Vec<f64> = (0..1u64 << k)
        .map(|mask| {
            thetas
                .iter()
                .enumerate()
                .map(|(j, t)| if mask >> j & 1 == 1 { -t } else { *t })
                .sum()
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Whether the signed sums are pairwise at least `s / 2^k` apart.
/// Fails if some angle lies outside its target interval.
pub fn sumset_separation_check(thetas: &[f64], s: f64, k: usize) -> Result<bool, Error> {
    if thetas.len() != k {
        return invalid("need exactly k angles");
    }
    let iv = nu_intervals(s, k)?;
    for (j, (&t, &(lo, hi))) in thetas.iter().zip(&iv).enumerate() {
        if !(t >= lo && t <= hi) {
            return invalid(format!("angle {j} = {t} lies outside [{lo}, {hi}]"));
        }
    }
    let sums = signed_sums(thetas);
    let gap = s / 2f64.powi(k as i32);
    Ok(sums.windows(2).all(|w| w[1] - w[0] >= gap * (1.0 - 1e-12)))
}

#[derive(Clone, Debug, Serialize)]
pub struct NuTarget {
    pub s: f64,
    pub k: usize,
    pub primes: Vec<GaussianPrime>,
    pub n: u64,
    pub dim: usize,
    /// The normalised points of the eigenspace sit exactly at the predicted angles.
    pub angles_match: bool,
    /// Wasserstein-1 distance on the circle to the four-arc measure.
    pub w1: f64,
}

/// Builds `n` as the squared modulus of a product of one Gaussian prime per
/// target interval, taking the smallest norm in each (ties by smaller angle).
pub fn construct_nu_target(s: f64, k: usize, r: f64) -> Result<NuTarget, Error> {
    let iv = nu_intervals(s, k)?;
    let mut primes: Vec<GaussianPrime> = Vec::with_capacity(k);
    for (j, &(lo, hi)) in iv.iter().enumerate() {
        let mut radius = 8.0f64.min(r);
        let found = loop {
            let used = |p: &GaussianPrime| primes.iter().any(|q| q.norm == p.norm);
            if let Some(p) = primes_in_arc(radius, lo, hi, true).into_iter().find(|p| !used(p)) {
                break p;
            }
            if radius >= r {
                return Err(Error::EmptySector { index: j, radius: r });
            }
            radius = (radius * 2.0).min(r);
        };
        primes.push(found);
    }
    let modulus: f64 = primes.iter().map(GaussianPrime::modulus).product();
    if modulus > r {
        return invalid(format!("product modulus {modulus} exceeds R = {r}"));
    }
    let n = primes
        .iter()
        .try_fold(1u64, |acc, p| acc.checked_mul(p.norm))
        .ok_or_else(|| Error::Invalid("n overflows u64".into()))?;
    let e = Eigenspace::new(n)?;
    let thetas: Vec<f64> = primes.iter().map(|p| p.angle).collect();
    let mut predicted: Vec<f64> = signed_sums(&thetas)
        .iter()
        .flat_map(|b| (0..4).map(move |j| (j as f64 * FRAC_PI_2 + b).rem_euclid(2.0 * PI)))
        .collect();
    predicted.sort_by(f64::total_cmp);
    let actual = e.angles();
    let angles_match = actual.len() == predicted.len()
        && actual.iter().zip(&predicted).all(|(a, b)| {
            let d = (a - b).abs();
            d.min(2.0 * PI - d) < 1e-9
        });
    let w1 = circle_w1(&e.angular_measure(), &AngularMeasure::Arcs { s }, 1 << 18);
    Ok(NuTarget {
        s,
        k,
        primes,
        n,
        dim: e.dim(),
        angles_match,
        w1,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct NuFourier {
    pub s: f64,
    pub k: i64,
    pub quadrature: f64,
    pub closed_form: f64,
}

/// The `k`-th Fourier coefficient of the four-arc measure, by adaptive
/// quadrature over the arcs and in closed form.
pub fn nu_s_fourier(s: f64, k: i64) -> Result<NuFourier, Error> {
    if !(0.0..=FRAC_PI_4).contains(&s) {
        return invalid("s must lie in [0, pi/4]");
    }
    let closed_form = crate::lattice::arcs_fourier_closed(s, k);
    let quadrature = if s == 0.0 {
        (0..4).map(|j| (k as f64 * j as f64 * FRAC_PI_2).cos()).sum::<f64>() / 4.0
    } else {
        (0..4)
            .map(|j| {
                let c = j as f64 * FRAC_PI_2;
                adaptive(|t| (k as f64 * t).cos(), c - s, c + s, 1e-15, 1e-14).0
            })
            .sum::<f64>()
            / (8.0 * s)
    };
    Ok(NuFourier {
        s,
        k,
        quadrature,
        closed_form,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_primes() {
        let ps: Vec<u64> = (0..60).filter(|&n| is_prime(n)).collect();
        assert_eq!(ps, [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59]);
        assert!(is_prime(1_000_000_007));
        assert!(!is_prime(3_215_031_751));
    }
}

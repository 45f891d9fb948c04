//! Sums of two squares and the lattice points on the circle of radius `sqrt(n)`.

use serde::Serialize;
use std::f64::consts::PI;

use crate::Error;

/// A point of `Z^2`.
pub type Point = (i64, i64);

/// Integer square root (floor).
pub fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// All `1 <= m <= x` expressible as `a^2 + b^2`, ascending.
pub fn sum_two_squares_up_to(x: u64) -> Vec<u64> {
    let mut hit = vec![false; x as usize + 1];
    let r = isqrt(x);
    for a in 0..=r {
        let a2 = a * a;
        for b in a..=r {
            let m = a2 + b * b;
            if m > x {
                break;
            }
            hit[m as usize] = true;
        }
    }
    (1..=x).filter(|&m| hit[m as usize]).collect()
}

/// Prime factorisation as `(prime, exponent)` pairs, ascending.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Number of prime factors counted with multiplicity.
pub fn big_omega(n: u64) -> u32 {
    factorize(n).iter().map(|&(_, e)| e).sum()
}

/// `r_2(n)` by scanning `a` and testing `n - a^2` for a perfect square.
pub fn r2_brute(n: u64) -> u64 {
    let r = isqrt(n);
    let mut count = 0;
    for a in 0..=r {
        let rest = n - a * a;
        let b = isqrt(rest);
        if b * b == rest {
            // (±a, ±b), collapsing signs of zero coordinates
            count += match (a == 0, b == 0) {
                (true, true) => 1,
                (true, false) | (false, true) => 2,
                (false, false) => 4,
            };
        }
    }
    count
}

/// `r_2(n)` from the factorisation: `4 * prod (e_p + 1)` over `p = 1 mod 4`,
/// zero if some `q = 3 mod 4` has odd exponent.
pub fn r2_formula(n: u64) -> u64 {
    if n == 0 {
        return 1;
    }
    let mut count = 4;
    for (p, e) in factorize(n) {
        match p % 4 {
            1 => count *= e as u64 + 1,
            3 if e % 2 == 1 => return 0,
            _ => {}
        }
    }
    count
}

/// Both counts of `r_2(n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct R2Count {
    pub brute: u64,
    pub formula: u64,
}

impl R2Count {
    pub fn agree(&self) -> bool {
        self.brute == self.formula
    }
}

pub fn r2(n: u64) -> R2Count {
    R2Count {
        brute: r2_brute(n),
        formula: r2_formula(n),
    }
}

/// The frequency set of a toral eigenspace.
#[derive(Clone, Debug, Serialize)]
pub struct Eigenspace {
    pub n: u64,
    /// All `(a, b)` with `a^2 + b^2 = n`, sorted by angle in `[0, 2pi)`.
    pub points: Vec<Point>,
    /// One representative of each `{l, -l}` pair: `a > 0`, or `a = 0, b > 0`.
    pub half_set: Vec<Point>,
}

impl Eigenspace {
    /// Enumerates the lattice points; fails if `n` is not a sum of two squares.
    pub fn new(n: u64) -> Result<Self, Error> {
        if n == 0 {
            return Err(Error::NotInS(n));
        }
        let r = isqrt(n) as i64;
        let mut points = Vec::new();
        for a in -r..=r {
            let rest = n - (a * a) as u64;
            let b = isqrt(rest) as i64;
            if (b * b) as u64 == rest {
                points.push((a, b));
                if b != 0 {
                    points.push((a, -b));
                }
            }
        }
        if points.is_empty() {
            return Err(Error::NotInS(n));
        }
        points.sort_by(|p, q| angle(*p).total_cmp(&angle(*q)));
        let half_set = points
            .iter()
            .copied()
            .filter(|&(a, b)| a > 0 || (a == 0 && b > 0))
            .collect();
        Ok(Eigenspace {
            n,
            points,
            half_set,
        })
    }

    /// Dimension `N_n`.
    pub fn dim(&self) -> usize {
        self.points.len()
    }

    /// Laplace eigenvalue `4 pi^2 n`.
    pub fn energy(&self) -> f64 {
        4.0 * PI * PI * self.n as f64
    }

    /// Angles of the normalised points, in `[0, 2pi)`.
    pub fn angles(&self) -> Vec<f64> {
        self.points.iter().map(|&p| angle(p)).collect()
    }

    /// Fourier coefficient of the atomic angular measure:
    /// the mean of `cos(k theta)` over the points.
    pub fn tau_hat(&self, k: i64) -> f64 {
        let (c, _) = self.fourier_sums(k);
        c / self.dim() as f64
    }

    /// `(sum cos(k theta), sum sin(k theta))`; the sine sum vanishes by symmetry.
    pub fn fourier_sums(&self, k: i64) -> (f64, f64) {
        self.points.iter().fold((0.0, 0.0), |(c, s), &p| {
            let t = k as f64 * angle(p);
            (c + t.cos(), s + t.sin())
        })
    }

    pub fn angular_measure(&self) -> AngularMeasure {
        AngularMeasure::Atomic {
            atoms: self.angles(),
        }
    }
}

/// Angle of a lattice point in `[0, 2pi)`.
pub fn angle((a, b): Point) -> f64 {
    let t = (b as f64).atan2(a as f64);
    if t < 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

/// Probability measures on the unit circle that arise as limits of the
/// normalised lattice-point distributions.
#[derive(Clone, Debug, Serialize)]
pub enum AngularMeasure {
    /// Equal atoms at the listed angles.
    Atomic { atoms: Vec<f64> },
    /// Uniform on the four arcs `[j pi/2 - s, j pi/2 + s]`, density `1/(8s)`.
    Arcs { s: f64 },
}

impl AngularMeasure {
    pub fn total_mass(&self) -> f64 {
        1.0
    }

    /// `int cos(k theta) d mu`, in closed form.
    pub fn fourier(&self, k: i64) -> f64 {
        match self {
            AngularMeasure::Atomic { atoms } => {
                atoms.iter().map(|t| (k as f64 * t).cos()).sum::<f64>() / atoms.len() as f64
            }
            AngularMeasure::Arcs { s } => arcs_fourier_closed(*s, k),
        }
    }

    /// Distribution function on `[0, 2pi)`, counting mass in `[0, theta]`.
    pub fn cdf(&self, theta: f64) -> f64 {
        match self {
            AngularMeasure::Atomic { atoms } => {
                atoms.iter().filter(|&&t| t <= theta).count() as f64 / atoms.len() as f64
            }
            AngularMeasure::Arcs { s } => {
                let mut m = 0.0;
                for j in 0..5 {
                    let c = j as f64 * PI / 2.0;
                    let lo = (c - s).max(0.0);
                    let hi = (c + s).min(2.0 * PI).min(theta);
                    if hi > lo {
                        m += (hi - lo) / (8.0 * s);
                    }
                }
                m
            }
        }
    }
}

/// `sin(ks)/(ks)` when `4 | k`, zero otherwise; `1` at `s = 0`.
pub fn arcs_fourier_closed(s: f64, k: i64) -> f64 {
    if k.rem_euclid(4) != 0 {
        return 0.0;
    }
    let x = k as f64 * s;
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Wasserstein-1 distance on the circle, `min_c int |F - G - c|`,
/// by a midpoint rule on `cells` equal cells.
pub fn circle_w1(mu: &AngularMeasure, nu: &AngularMeasure, cells: usize) -> f64 {
    let h = 2.0 * PI / cells as f64;
    let mut diff: Vec<f64> = (0..cells)
        .map(|i| {
            let t = (i as f64 + 0.5) * h;
            mu.cdf(t) - nu.cdf(t)
        })
        .collect();
    let mut sorted = diff.clone();
    sorted.sort_by(f64::total_cmp);
    let c = sorted[cells / 2];
    for d in diff.iter_mut() {
        *d = (*d - c).abs();
    }
    diff.iter().sum::<f64>() * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isqrt_edges() {
        for n in [0u64, 1, 2, 3, 4, 15, 16, 17, 1 << 40, (1 << 40) - 1] {
            let r = isqrt(n);
            assert!(r * r <= n && (r + 1) * (r + 1) > n);
        }
    }

    #[test]
    fn half_set_has_one_of_each_pair() {
        let e = Eigenspace::new(25).unwrap();
        assert_eq!(e.half_set.len() * 2, e.dim());
        for &(a, b) in &e.half_set {
            assert!(!e.half_set.contains(&(-a, -b)));
        }
    }
}

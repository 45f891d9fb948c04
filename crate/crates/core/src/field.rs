//! Gaussian toral eigenfunctions and their two-point statistics.

use nalgebra::{Matrix4, SymmetricEigen};
use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::Serialize;
use std::f64::consts::PI;

use crate::lattice::{Eigenspace, Point};
use crate::rng::normal_pair;
use crate::{invalid, Error};

pub type Mat2 = [[f64; 2]; 2];

/// Below this value of `1 - r^2` the conditioned blocks are not formed.
pub const SINGULAR_EPS: f64 = 1e-12;

/// One realisation: `a_l = xi + i zeta` on the half-set, `a_{-l}` conjugate.
#[derive(Clone, Debug)]
pub struct WaveSample {
    pub n: u64,
    pub dim: usize,
    pub half_set: Vec<Point>,
    pub xi: Vec<f64>,
    pub zeta: Vec<f64>,
}

impl WaveSample {
    /// Coefficients drawn from the stream addressed by `(seed, trial, index)`.
    pub fn sample(space: &Eigenspace, seed: u64, trial: u64) -> Self {
        let (xi, zeta) = (0..space.half_set.len())
            .map(|i| normal_pair(seed, trial, i as u64))
            .unzip();
        WaveSample {
            n: space.n,
            dim: space.dim(),
            half_set: space.half_set.clone(),
            xi,
            zeta,
        }
    }

    fn scale(&self) -> f64 {
        (2.0 / self.dim as f64).sqrt()
    }

    /// Direct evaluation at a point of the torus.
    pub fn value_at(&self, x: [f64; 2]) -> f64 {
        let s: f64 = self
            .half_set
            .iter()
            .zip(self.xi.iter().zip(&self.zeta))
            .map(|(&(a, b), (&xi, &zeta))| {
                let t = 2.0 * PI * (a as f64 * x[0] + b as f64 * x[1]);
                xi * t.cos() - zeta * t.sin()
            })
            .sum();
        self.scale() * s
    }

    /// Values at `(j/G, k/G)` via an inverse 2-d FFT; entry `[j, k]`.
    pub fn evaluate_grid(&self, g: usize) -> Result<Array2<f64>, Error> {
        let root = crate::lattice::isqrt(self.n) as usize;
        let ceil_root = if root * root == self.n as usize { root } else { root + 1 };
        if g <= 2 * ceil_root {
            return invalid(format!("grid size {g} must exceed 2 ceil(sqrt(n)) = {}", 2 * ceil_root));
        }
        let amp = 1.0 / (2.0 * self.dim as f64).sqrt();
        let mut buf = vec![Complex64::new(0.0, 0.0); g * g];
        let wrap = |v: i64| v.rem_euclid(g as i64) as usize;
        for (&(a, b), (&xi, &zeta)) in self.half_set.iter().zip(self.xi.iter().zip(&self.zeta)) {
            let c = Complex64::new(xi, zeta) * amp;
            buf[wrap(a) * g + wrap(b)] += c;
            buf[wrap(-a) * g + wrap(-b)] += c.conj();
        }
        inverse_fft_2d(&mut buf, g);
        Ok(Array2::from_shape_fn((g, g), |(j, k)| buf[j * g + k].re))
    }
}

/// Unnormalised inverse DFT of a row-major `g x g` buffer, in place.
fn inverse_fft_2d(buf: &mut [Complex64], g: usize) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(g);
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

/// Grid size giving `points_per_wavelength` samples per wavelength `1/sqrt(n)`,
/// and always enough to resolve every frequency.
pub fn grid_size(n: u64, points_per_wavelength: f64) -> usize {
    let root = (n as f64).sqrt();
    let min = 2 * root.ceil() as usize + 1;
    ((points_per_wavelength * root).ceil() as usize).max(min)
}

/// Covariance `r`, gradient `D` and Hessian `H` at one displacement.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct KernelBase {
    pub r: f64,
    /// `1 - r`, summed without cancellation.
    pub one_minus_r: f64,
    /// `1 + r`, summed without cancellation.
    pub one_plus_r: f64,
    pub d: [f64; 2],
    pub h: Mat2,
}

/// Normalised conditional covariance blocks of the gradients at two points
/// given that the field vanishes at both.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConditionedBlocks {
    pub r: f64,
    pub x: Mat2,
    pub y: Mat2,
}

impl ConditionedBlocks {
    /// `I + [[X, Y], [Y, X]]`.
    pub fn omega(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| {
            let (bi, bj) = (i / 2, j / 2);
            let m = if bi == bj { self.x } else { self.y };
            m[i % 2][j % 2] + if i == j { 1.0 } else { 0.0 }
        })
    }
}

/// The covariance kernel of the eigenspace and its derivatives.
#[derive(Clone, Debug)]
pub struct CovarianceKernel {
    pub n: u64,
    pub dim: usize,
    pub energy: f64,
    half_set: Vec<[f64; 2]>,
}

impl CovarianceKernel {
    pub fn new(space: &Eigenspace) -> Self {
        CovarianceKernel {
            n: space.n,
            dim: space.dim(),
            energy: space.energy(),
            half_set: space.half_set.iter().map(|&(a, b)| [a as f64, b as f64]).collect(),
        }
    }

    pub fn base(&self, z: [f64; 2]) -> KernelBase {
        let nn = self.dim as f64;
        let (mut c, mut sm, mut cp) = (0.0, 0.0, 0.0);
        let mut d = [0.0; 2];
        let mut h = [[0.0; 2]; 2];
        for l in &self.half_set {
            let half = PI * (l[0] * z[0] + l[1] * z[1]);
            let (s1, c1) = half.sin_cos();
            let (s2, c2) = (2.0 * half).sin_cos();
            c += c2;
            sm += s1 * s1;
            cp += c1 * c1;
            for i in 0..2 {
                d[i] += s2 * l[i];
                for j in 0..2 {
                    h[i][j] += c2 * l[i] * l[j];
                }
            }
        }
        for i in 0..2 {
            d[i] *= -4.0 * PI / nn;
            for j in 0..2 {
                h[i][j] *= -8.0 * PI * PI / nn;
            }
        }
        KernelBase {
            r: 2.0 * c / nn,
            one_minus_r: 4.0 * sm / nn,
            one_plus_r: 4.0 * cp / nn,
            d,
            h,
        }
    }

    pub fn r(&self, z: [f64; 2]) -> f64 {
        let s: f64 = self
            .half_set
            .iter()
            .map(|l| (2.0 * PI * (l[0] * z[0] + l[1] * z[1])).cos())
            .sum();
        2.0 * s / self.dim as f64
    }

    pub fn conditioned(&self, z: [f64; 2]) -> Result<ConditionedBlocks, Error> {
        conditioned_blocks(&self.base(z), self.energy)
    }
}

/// `X = -2 D^T D / (E (1 - r^2))`, `Y = -(2/E)(H + r D^T D / (1 - r^2))`.
pub fn conditioned_blocks(b: &KernelBase, energy: f64) -> Result<ConditionedBlocks, Error> {
    let det = b.one_minus_r * b.one_plus_r;
    if !(det >= SINGULAR_EPS) {
        return Err(Error::SingularDisplacement(det));
    }
    let mut x = [[0.0; 2]; 2];
    let mut y = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let dd = b.d[i] * b.d[j] / det;
            x[i][j] = -2.0 * dd / energy;
            y[i][j] = -2.0 * (b.h[i][j] + b.r * dd) / energy;
        }
    }
    Ok(ConditionedBlocks { r: b.r, x, y })
}

fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn tr(a: &Mat2) -> f64 {
    a[0][0] + a[1][1]
}

fn det2(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

/// Kernel-derived traces that enter the second-order expansion of the
/// two-point function.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct KernelTraces {
    pub r: f64,
    pub tr_x: f64,
    pub tr_y2: f64,
    pub tr_xy2: f64,
    pub tr_x2: f64,
    pub tr_y4: f64,
    pub tr_x3: f64,
    pub tr_y6: f64,
}

impl KernelTraces {
    pub fn of(b: &ConditionedBlocks) -> Self {
        let y2 = mul(&b.y, &b.y);
        let x2 = mul(&b.x, &b.x);
        let y4 = mul(&y2, &y2);
        KernelTraces {
            r: b.r,
            tr_x: tr(&b.x),
            tr_y2: tr(&y2),
            tr_xy2: tr(&mul(&b.x, &y2)),
            tr_x2: tr(&x2),
            tr_y4: tr(&y4),
            tr_x3: tr(&mul(&x2, &b.x)),
            tr_y6: tr(&mul(&y4, &y2)),
        }
    }

    /// Second-order part of `K_2 - 1/4`.
    pub fn l2(&self) -> f64 {
        let r2 = self.r * self.r;
        (self.r * self.r + self.tr_x + self.tr_y2 / 4.0 + 0.75 * r2 * r2 - self.tr_xy2 / 8.0 - self.tr_x2 / 16.0
            + self.tr_y4 / 128.0
            + self.tr_y2 * self.tr_y2 / 256.0
            - self.tr_x * self.tr_y2 / 16.0
            + r2 * self.tr_x / 2.0
            + r2 * self.tr_y2 / 8.0)
            / 8.0
    }
}

/// How the two-point function is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum K2Method {
    /// `1/4 + L_2`; valid for `|r| < 1/4`.
    Taylor,
    /// Monte Carlo over `V ~ N(0, Omega)` with this many draws.
    GaussianMc { samples: usize, seed: u64 },
    /// Deterministic quadrature of a Laplace-transform representation.
    Quadrature,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct K2Value {
    pub value: f64,
    /// Standard error, for Monte Carlo.
    pub se: Option<f64>,
}

/// The normalised two-point function of the zero set at displacement `z`.
pub fn two_point_k2(kernel: &CovarianceKernel, z: [f64; 2], method: K2Method) -> Result<K2Value, Error> {
    let b = kernel.conditioned(z)?;
    k2_from_blocks(&b, method)
}

pub fn k2_from_blocks(b: &ConditionedBlocks, method: K2Method) -> Result<K2Value, Error> {
    match method {
        K2Method::Taylor => {
            if b.r.abs() >= 0.25 {
                return invalid(format!("Taylor form needs |r| < 1/4, got r = {}", b.r));
            }
            Ok(K2Value {
                value: 0.25 + KernelTraces::of(b).l2(),
                se: None,
            })
        }
        K2Method::GaussianMc { samples, seed } => {
            let (m, se) = norm_product_mc(&b.omega(), samples, seed)?;
            let c = prefactor(b.r);
            Ok(K2Value {
                value: c * m,
                se: Some(c * se),
            })
        }
        K2Method::Quadrature => Ok(K2Value {
            value: prefactor(b.r) * norm_product_quadrature(b),
            se: None,
        }),
    }
}

fn prefactor(r: f64) -> f64 {
    1.0 / (2.0 * PI * (1.0 - r * r).sqrt())
}

/// Symmetric square root, clipping tiny negative eigenvalues.
pub fn symmetric_sqrt(m: &Matrix4<f64>) -> Result<Matrix4<f64>, Error> {
    let eig = SymmetricEigen::new(*m);
    let scale = eig.eigenvalues.amax().max(1.0);
    if eig.eigenvalues.iter().any(|&v| v < -1e-9 * scale) {
        return Err(Error::Numerical("covariance is not positive semidefinite".into()));
    }
    let d = Matrix4::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    Ok(eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// `E |V_1| |V_2|` by Monte Carlo. The same draws `Z` are pushed through
/// `Omega^(1/2)` and through the identity, and the known identity value
/// `pi/2` is used as a control.
pub fn norm_product_mc(omega: &Matrix4<f64>, samples: usize, seed: u64) -> Result<(f64, f64), Error> {
    if samples < 2 {
        return invalid("need at least two samples");
    }
    let root = symmetric_sqrt(omega)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..samples {
        let z = nalgebra::Vector4::from_fn(|_, _| StandardNormal.sample(&mut rng));
        let v = root * z;
        let prod = |w: &nalgebra::Vector4<f64>| w[0].hypot(w[1]) * w[2].hypot(w[3]);
        let diff = prod(&v) - prod(&z);
        sum += diff;
        sum2 += diff * diff;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = (sum2 - m * mean * mean) / (m - 1.0);
    Ok((PI / 2.0 + mean, (var.max(0.0) / m).sqrt()))
}

/// Trapezoid nodes in `a = log t` for the Laplace-transform integrals.
const LOG_SPAN: f64 = 48.0;
const LOG_STEP: f64 = 0.5;

/// `E |V_1| |V_2|` for `V ~ N(0, Omega)` from
/// `|v| = (1 / (2 sqrt(pi))) int_0^inf (1 - exp(-t |v|^2)) t^(-3/2) dt`
/// and the Gaussian Laplace transform
/// `E exp(-t|V_1|^2 - u|V_2|^2) = F(t) F(u) det(I - P(t, u))^(-1/2)`,
/// where `F(t) = det(I + 2tA)^(-1/2)`, `A = I + X` and
/// `P = 4tu (I + 2uA)^(-1) Y (I + 2tA)^(-1) Y`.
/// The double integral is taken by the trapezoid rule in `log t, log u`,
/// which converges geometrically for these analytic integrands.
pub fn norm_product_quadrature(b: &ConditionedBlocks) -> f64 {
    let a = [[1.0 + b.x[0][0], b.x[0][1]], [b.x[1][0], 1.0 + b.x[1][1]]];
    let (tra, deta) = (tr(&a), det2(&a));
    let steps = (2.0 * LOG_SPAN / LOG_STEP) as usize;
    struct Node {
        w: f64,
        f: f64,
        one_minus_f: f64,
        c: Mat2,
        det_c: f64,
    }
    let nodes: Vec<Node> = (0..=steps)
        .map(|i| {
            let la = -LOG_SPAN + i as f64 * LOG_STEP;
            let t = la.exp();
            let q = 2.0 * t * tra + 4.0 * t * t * deta;
            let log_f = -0.5 * q.ln_1p();
            let inv_det = 1.0 / (1.0 + q);
            // (I + 2tA)^-1 = adj / det
            let m = [
                [(1.0 + 2.0 * t * a[1][1]) * inv_det, -2.0 * t * a[0][1] * inv_det],
                [-2.0 * t * a[1][0] * inv_det, (1.0 + 2.0 * t * a[0][0]) * inv_det],
            ];
            let my = mul(&m, &b.y);
            let c = [[2.0 * t * my[0][0], 2.0 * t * my[0][1]], [2.0 * t * my[1][0], 2.0 * t * my[1][1]]];
            Node {
                w: LOG_STEP * (-0.5 * la).exp(),
                f: log_f.exp(),
                one_minus_f: -log_f.exp_m1(),
                det_c: det2(&c),
                c,
            }
        })
        .collect();
    // beyond the grid the single integrand is `tr A e^(la/2)` on the left and
    // `e^(-la/2)` on the right; add both geometric tails of the trapezoid sum
    let ratio = (-0.5 * LOG_STEP).exp();
    let tails = LOG_STEP * (-0.5 * LOG_SPAN).exp() * ratio / (1.0 - ratio) * (1.0 + tra);
    let single: f64 = nodes.iter().map(|n| n.w * n.one_minus_f).sum::<f64>() + tails;
    let mut double = 0.0;
    for (i, ni) in nodes.iter().enumerate() {
        let mut row = 0.0;
        for (j, nj) in nodes.iter().enumerate().take(i + 1) {
            let trp = ni.c[0][0] * nj.c[0][0] + ni.c[0][1] * nj.c[1][0] + ni.c[1][0] * nj.c[0][1] + ni.c[1][1] * nj.c[1][1];
            let q = -trp + ni.det_c * nj.det_c;
            let rho = (-0.5 * q.ln_1p()).exp_m1();
            let term = nj.w * nj.f * rho;
            row += if i == j { 0.5 * term } else { term };
        }
        double += 2.0 * ni.w * ni.f * row;
    }
    (single * single + double) / (4.0 * PI)
}

/// Empirical covariance of the field at one pair of points.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CovarianceCheck {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub exact: f64,
    pub empirical: f64,
    pub se: f64,
}

/// Sample covariance `E T(x) T(y)` over independent realisations.
pub fn empirical_covariance(
    space: &Eigenspace,
    pairs: &[([f64; 2], [f64; 2])],
    trials: usize,
    seed: u64,
) -> Vec<CovarianceCheck> {
    use rayon::prelude::*;
    let kernel = CovarianceKernel::new(space);
    let products: Vec<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let w = WaveSample::sample(space, seed, t);
            pairs.iter().map(|(x, y)| w.value_at(*x) * w.value_at(*y)).collect()
        })
        .collect();
    pairs
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            let m = trials as f64;
            let mean = products.iter().map(|p| p[i]).sum::<f64>() / m;
            let var = products.iter().map(|p| (p[i] - mean).powi(2)).sum::<f64>() / (m - 1.0);
            CovarianceCheck {
                x,
                y,
                exact: kernel.r([x[0] - y[0], x[1] - y[1]]),
                empirical: mean,
                se: (var / m).sqrt(),
            }
        })
        .collect()
}

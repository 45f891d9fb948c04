//! Additive correlations among lattice points on a circle.
//!
//! Tuples are ordered. Zero-sum counts use a meet-in-the-middle split: the
//! multiset of `ceil(l/2)`-fold sums is hashed and matched against the
//! `floor(l/2)`-fold sums. Near-zero sums use the same split with a grid of
//! cells of side `ceil(K)`.

use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;

use crate::lattice::{sum_two_squares_up_to, Eigenspace, Point};
use crate::{invalid, Error};

type SumCounts = HashMap<Point, u64>;

fn check_work(estimated: u64, limit: u64) -> Result<(), Error> {
    if estimated > limit {
        Err(Error::WorkLimit { estimated, limit })
    } else {
        Ok(())
    }
}

fn pow_sat(base: u64, exp: usize) -> u64 {
    (0..exp).fold(1u64, |acc, _| acc.saturating_mul(base))
}

/// Multiset of `h`-fold ordered sums.
fn tuple_sums(points: &[Point], h: usize) -> SumCounts {
    let mut acc: SumCounts = HashMap::from([((0, 0), 1)]);
    for _ in 0..h {
        let mut next = HashMap::with_capacity(acc.len() * points.len() / 2 + 1);
        for (&(x, y), &c) in &acc {
            for &(a, b) in points {
                *next.entry((x + a, y + b)).or_insert(0) += c;
            }
        }
        acc = next;
    }
    acc
}

/// Every `h`-tuple of point indices grouped by its sum.
fn tuple_lists(points: &[Point], h: usize) -> HashMap<Point, Vec<Vec<usize>>> {
    let mut out: HashMap<Point, Vec<Vec<usize>>> = HashMap::new();
    let n = points.len();
    let mut idx = vec![0usize; h];
    loop {
        let s = idx.iter().fold((0, 0), |(x, y), &i| (x + points[i].0, y + points[i].1));
        out.entry(s).or_default().push(idx.clone());
        let mut pos = h;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < n {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// `|S_n(l)|`: ordered `l`-tuples summing to zero.
pub fn spectral_correlations(n: u64, l: usize, work_limit: u64) -> Result<u64, Error> {
    let e = Eigenspace::new(n)?;
    spectral_count(&e.points, l, work_limit)
}

pub(crate) fn spectral_count(points: &[Point], l: usize, work_limit: u64) -> Result<u64, Error> {
    if l == 0 {
        return invalid("l must be positive");
    }
    let h = l.div_ceil(2);
    let nn = points.len() as u64;
    check_work(pow_sat(nn, h).saturating_add(pow_sat(nn, l - h)), work_limit)?;
    let left = tuple_sums(points, h);
    let right = if l - h == h { left.clone() } else { tuple_sums(points, l - h) };
    Ok(left
        .iter()
        .map(|(&(x, y), &c)| c * right.get(&(-x, -y)).copied().unwrap_or(0))
        .sum())
}

fn binom(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `|D_n(l)|`: ordered tuples that split into cancelling pairs.
///
/// A tuple splits into pairs `{l, -l}` exactly when each point occurs as often
/// as its antipode, so the count runs over the `N/2` antipodal classes.
pub fn diagonal_correlations(n: u64, l: usize) -> Result<u64, Error> {
    let e = Eigenspace::new(n)?;
    Ok(diagonal_count(e.dim(), l))
}

pub(crate) fn diagonal_count(dim: usize, l: usize) -> u64 {
    if l % 2 == 1 {
        return 0;
    }
    let k = l / 2;
    // dp[t]: balanced words of length 2t over the classes seen so far
    let mut dp = vec![0u128; k + 1];
    dp[0] = 1;
    for _ in 0..dim / 2 {
        let mut next = vec![0u128; k + 1];
        for t in 0..=k {
            if dp[t] == 0 {
                continue;
            }
            for j in 0..=(k - t) {
                let len = 2 * (t + j) as u64;
                next[t + j] += dp[t] * binom(len, 2 * j as u64) * binom(2 * j as u64, j as u64);
            }
        }
        dp = next;
    }
    dp[k] as u64
}

/// Near-zero sums: tuples with `0 < |sum| <= K`.
#[derive(Clone, Debug, Serialize)]
pub struct QuasiCorrelations {
    pub n: u64,
    pub l: usize,
    pub k: f64,
    pub count: u64,
    /// Up to `tuple_cap` explicit tuples.
    pub tuples: Vec<Vec<Point>>,
}

/// `|C_n(l; K)|`, optionally listing up to `tuple_cap` tuples.
pub fn quasi_correlations(
    n: u64,
    l: usize,
    k: f64,
    tuple_cap: usize,
    work_limit: u64,
) -> Result<QuasiCorrelations, Error> {
    let e = Eigenspace::new(n)?;
    quasi_count(&e.points, n, l, k, tuple_cap, work_limit, false)
}

fn cell_of((x, y): Point, side: i64) -> (i64, i64) {
    (x.div_euclid(side), y.div_euclid(side))
}

fn quasi_count(
    points: &[Point],
    n: u64,
    l: usize,
    k: f64,
    tuple_cap: usize,
    work_limit: u64,
    stop_at_first: bool,
) -> Result<QuasiCorrelations, Error> {
    if l < 2 {
        return invalid("quasi-correlations need l >= 2");
    }
    if !(k > 0.0) {
        return invalid("K must be positive");
    }
    let h = l.div_ceil(2);
    let nn = points.len() as u64;
    let mut work = pow_sat(nn, h).saturating_add(pow_sat(nn, l - h));
    check_work(work, work_limit)?;
    let left = tuple_sums(points, h);
    let right = if l - h == h { left.clone() } else { tuple_sums(points, l - h) };
    let side = (k.ceil() as i64).max(1);
    let mut grid: HashMap<(i64, i64), Vec<(Point, u64)>> = HashMap::new();
    for (&w, &c) in &right {
        grid.entry(cell_of(w, side)).or_default().push((w, c));
    }
    let k2 = k * k;
    let mut count = 0u64;
    let mut hits: Vec<(Point, Point)> = Vec::new();
    'outer: for (&(vx, vy), &cv) in &left {
        let (cx, cy) = cell_of((-vx, -vy), side);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(bucket) = grid.get(&(cx + dx, cy + dy)) else { continue };
                work += bucket.len() as u64;
                for &((wx, wy), cw) in bucket {
                    let (sx, sy) = (vx + wx, vy + wy);
                    let q = sx * sx + sy * sy;
                    if q > 0 && (q as f64) <= k2 {
                        count += cv * cw;
                        if hits.len() < tuple_cap {
                            hits.push(((vx, vy), (wx, wy)));
                        }
                        if stop_at_first {
                            break 'outer;
                        }
                    }
                }
            }
        }
        check_work(work, work_limit)?;
    }
    let mut tuples = Vec::new();
    if tuple_cap > 0 && !hits.is_empty() {
        let ll = tuple_lists(points, h);
        let rl = tuple_lists(points, l - h);
        'fill: for (v, w) in hits {
            for a in &ll[&v] {
                for b in &rl[&w] {
                    if tuples.len() >= tuple_cap {
                        break 'fill;
                    }
                    tuples.push(a.iter().chain(b).map(|&i| points[i]).collect());
                }
            }
        }
    }
    Ok(QuasiCorrelations {
        n,
        l,
        k,
        count,
        tuples,
    })
}

/// Which power of `n` sets the separation threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ThresholdRule {
    /// `n^(1/2 - delta)`.
    HalfMinusDelta,
    /// `n^((1 - delta)/2)`.
    HalfOfOneMinusDelta,
}

impl ThresholdRule {
    pub fn threshold(&self, n: u64, delta: f64) -> f64 {
        match self {
            ThresholdRule::HalfMinusDelta => (n as f64).powf(0.5 - delta),
            ThresholdRule::HalfOfOneMinusDelta => (n as f64).powf(0.5 * (1.0 - delta)),
        }
    }

    pub fn formula(&self) -> &'static str {
        match self {
            ThresholdRule::HalfMinusDelta => "n^(1/2 - delta)",
            ThresholdRule::HalfOfOneMinusDelta => "n^((1 - delta)/2)",
        }
    }
}

/// True when no `l`-tuple has a nonzero sum of norm at most `n^(1/2 - delta)`.
pub fn separated(n: u64, l: usize, delta: f64) -> Result<bool, Error> {
    separated_at(n, l, ThresholdRule::HalfMinusDelta.threshold(n, delta), crate::DEFAULT_WORK_LIMIT)
}

/// True when no `l`-tuple has a nonzero sum of norm at most `k`.
pub fn separated_at(n: u64, l: usize, k: f64, work_limit: u64) -> Result<bool, Error> {
    let e = Eigenspace::new(n)?;
    Ok(quasi_count(&e.points, n, l, k, 0, work_limit, true)?.count == 0)
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    pub n: u64,
    pub dim: usize,
    pub count: u64,
    pub threshold: f64,
    pub separated: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanReport {
    pub range: (u64, u64),
    pub l: usize,
    pub delta: f64,
    pub exceptional: Vec<u64>,
    pub scanned: usize,
    pub fraction: f64,
    pub threshold_rule: String,
    pub rows: Vec<ScanRow>,
    /// Values of `n` skipped because the work limit was hit.
    pub skipped: Vec<u64>,
}

/// Scans `S` within `[big_n, 2 big_n]` for failures of separatedness.
pub fn scan_exceptional(
    big_n: u64,
    l: usize,
    delta: f64,
    rule: ThresholdRule,
    work_limit: u64,
) -> Result<ScanReport, Error> {
    scan_range(big_n, 2 * big_n, l, delta, rule, work_limit)
}

/// Scans `S` within `[lo, hi]` for failures of separatedness.
pub fn scan_range(
    lo: u64,
    hi: u64,
    l: usize,
    delta: f64,
    rule: ThresholdRule,
    work_limit: u64,
) -> Result<ScanReport, Error> {
    if lo == 0 || hi < lo {
        return invalid("need 0 < lo <= hi");
    }
    let ns: Vec<u64> = sum_two_squares_up_to(hi).into_iter().filter(|&m| m >= lo).collect();
    let results: Vec<Result<ScanRow, (u64, Error)>> = ns
        .par_iter()
        .map(|&n| {
            let e = Eigenspace::new(n).map_err(|err| (n, err))?;
            let k = rule.threshold(n, delta);
            let q = quasi_count(&e.points, n, l, k, 0, work_limit, false).map_err(|err| (n, err))?;
            Ok(ScanRow {
                n,
                dim: e.dim(),
                count: q.count,
                threshold: k,
                separated: q.count == 0,
            })
        })
        .collect();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err((n, Error::WorkLimit { .. })) => skipped.push(n),
            Err((_, err)) => return Err(err),
        }
    }
    let exceptional: Vec<u64> = rows.iter().filter(|r| !r.separated).map(|r| r.n).collect();
    let fraction = if rows.is_empty() {
        0.0
    } else {
        exceptional.len() as f64 / rows.len() as f64
    };
    Ok(ScanReport {
        range: (lo, hi),
        l,
        delta,
        scanned: rows.len(),
        exceptional,
        fraction,
        threshold_rule: rule.formula().to_string(),
        rows,
        skipped,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ImplicationCheck {
    pub n: u64,
    pub delta: f64,
    pub holds2: bool,
    pub holds4: bool,
    pub implication_holds: bool,
}

/// Separation of pairs at `n^(1/2 - delta)` should force separation of
/// quadruples at `n^(1/2 - 2 delta)`.
pub fn check_two_implies_four(n: u64, delta: f64) -> Result<ImplicationCheck, Error> {
    if !(delta > 0.0 && delta < 0.25) {
        return invalid("delta must lie in (0, 1/4)");
    }
    let nf = n as f64;
    let holds2 = separated_at(n, 2, nf.powf(0.5 - delta), crate::DEFAULT_WORK_LIMIT)?;
    let holds4 = separated_at(n, 4, nf.powf(0.5 - 2.0 * delta), crate::DEFAULT_WORK_LIMIT)?;
    Ok(ImplicationCheck {
        n,
        delta,
        holds2,
        holds4,
        implication_holds: !holds2 || holds4,
    })
}

/// Whether the trigonometric sum uses cosines or sines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

/// Parameters of the small-trigonometric-sum count over Gaussian integers.
#[derive(Clone, Debug, Serialize)]
pub struct GaussianCountParams {
    pub y: f64,
    pub k: usize,
    /// `l` rows of `k` signs, each `+1` or `-1`.
    pub eps: Vec<Vec<i8>>,
    /// `l` signs.
    pub eta: Vec<i8>,
    /// `l` quarter-turn offsets, read modulo 4.
    pub nu: Vec<u8>,
    pub sign: Sign,
    pub delta: f64,
}

impl GaussianCountParams {
    fn validate(&self) -> Result<(), Error> {
        let l = self.eta.len();
        if self.k == 0 || l == 0 {
            return invalid("k and l must be positive");
        }
        if self.eps.len() != l || self.nu.len() != l {
            return invalid("eps, eta and nu must all have l rows");
        }
        if self.eps.iter().any(|row| row.len() != self.k || row.iter().any(|&e| e != 1 && e != -1)) {
            return invalid("eps rows must have k entries in {+1, -1}");
        }
        if self.eta.iter().any(|&e| e != 1 && e != -1) {
            return invalid("eta entries must be +1 or -1");
        }
        if !(self.y >= 1.0) {
            return invalid("y must be at least 1");
        }
        Ok(())
    }
}

type Gi = (i128, i128);

fn gmul(a: Gi, b: Gi) -> Gi {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

/// Real (cosine) or imaginary (sine) part of `i^nu z`.
fn rotated_part(z: Gi, nu: u8, sign: Sign) -> i128 {
    let (re, im) = match nu % 4 {
        0 => (z.0, z.1),
        1 => (-z.1, z.0),
        2 => (-z.0, -z.1),
        _ => (z.1, -z.0),
    };
    match sign {
        Sign::Plus => re,
        Sign::Minus => im,
    }
}

/// Exact count of `k`-tuples of nonzero Gaussian integers with product modulus
/// in `[y, 2y]` whose signed trigonometric sum is nonzero and below `y^(-delta)`.
///
/// Each cosine (or sine) equals an integer divided by `|prod a_j|`, so the
/// test is carried out in integer arithmetic.
pub fn gaussian_count(p: &GaussianCountParams, work_limit: u64) -> Result<u64, Error> {
    p.validate()?;
    let y2 = p.y * p.y;
    let max_norm = (4.0 * y2).floor() as i64;
    let r = (max_norm as f64).sqrt() as i64 + 1;
    let mut by_norm: Vec<(i64, Gi)> = Vec::new();
    for a in -r..=r {
        for b in -r..=r {
            let q = a * a + b * b;
            if q > 0 && q <= max_norm {
                by_norm.push((q, (a as i128, b as i128)));
            }
        }
    }
    by_norm.sort_by_key(|x| x.0);
    let l = p.eta.len();
    let cut = p.y.powf(-2.0 * p.delta);
    let mut state = Walk {
        p,
        by_norm: &by_norm,
        y2,
        cut,
        count: 0,
        work: 0,
        limit: work_limit,
    };
    state.descend(0, 1, &vec![(1, 0); l])?;
    Ok(state.count)
}

struct Walk<'a> {
    p: &'a GaussianCountParams,
    by_norm: &'a [(i64, Gi)],
    y2: f64,
    cut: f64,
    count: u64,
    work: u64,
    limit: u64,
}

impl Walk<'_> {
    fn descend(&mut self, j: usize, norm: i64, prods: &[Gi]) -> Result<(), Error> {
        let hi = (4.0 * self.y2 / norm as f64).floor() as i64;
        let last = j + 1 == self.p.k;
        let lo = if last { (self.y2 / norm as f64).ceil() as i64 } else { 1 };
        let start = self.by_norm.partition_point(|x| x.0 < lo);
        let end = self.by_norm.partition_point(|x| x.0 <= hi);
        for &(q, a) in &self.by_norm[start..end] {
            self.work += 1;
            if self.work > self.limit {
                return Err(Error::WorkLimit {
                    estimated: self.work,
                    limit: self.limit,
                });
            }
            let next: Vec<Gi> = prods
                .iter()
                .zip(&self.p.eps)
                .map(|(&z, row)| gmul(z, if row[j] == 1 { a } else { (a.0, -a.1) }))
                .collect();
            let total = norm * q;
            if last {
                let tf = total as f64;
                if tf < self.y2 || tf > 4.0 * self.y2 {
                    continue;
                }
                let d: i128 = next
                    .iter()
                    .zip(&self.p.eta)
                    .zip(&self.p.nu)
                    .map(|((&z, &e), &nu)| e as i128 * rotated_part(z, nu, self.p.sign))
                    .sum();
                // 0 < |d| / sqrt(total) < y^-delta
                if d != 0 && (d as f64).powi(2) < tf * self.cut {
                    self.count += 1;
                }
            } else {
                self.descend(j + 1, total, &next)?;
            }
        }
        Ok(())
    }
}

/// Normalised count `count / ((2k)! y^(2 - delta/4^k) log^(k-1)(2 + 2y))`,
/// whose `k`-th root estimates the constant in the counting bound.
pub fn gaussian_count_ratio(count: u64, y: f64, k: usize, delta: f64) -> f64 {
    let fact: f64 = (1..=2 * k).map(|i| i as f64).product();
    let scale = fact * y.powf(2.0 - delta / 4f64.powi(k as i32)) * (2.0 + 2.0 * y).ln().powi(k as i32 - 1);
    count as f64 / scale
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrelationReport {
    pub n: u64,
    pub dim: usize,
    pub l: usize,
    pub spectral: u64,
    pub diagonal: u64,
    pub quasi: Option<QuasiCorrelations>,
}

pub fn correlation_report(
    n: u64,
    l: usize,
    k: Option<f64>,
    tuple_cap: usize,
    work_limit: u64,
) -> Result<CorrelationReport, Error> {
    let e = Eigenspace::new(n)?;
    let spectral = spectral_count(&e.points, l, work_limit)?;
    let quasi = match k {
        Some(k) => Some(quasi_count(&e.points, n, l, k, tuple_cap, work_limit, false)?),
        None => None,
    };
    Ok(CorrelationReport {
        n,
        dim: e.dim(),
        l,
        spectral,
        diagonal: diagonal_count(e.dim(), l),
        quasi,
    })
}

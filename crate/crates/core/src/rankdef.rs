//! Spectral factorization of rank-deficient nonnegative para-Hermitian
//! matrix polynomials.
//!
//! For an `m x m` input `S` of rank `k` on the unit circle the driver
//! [`spectral_factor`] proceeds as follows:
//!
//! 1. estimate `k` and permute so the leading `k x k` block `S00` has full
//!    rank almost everywhere;
//! 2. factor `S00 = S00+ (S00+)*` with [`crate::fullrank`];
//! 3. form the rational matrix `S0 = [S00+; S10 (S00-)^-1]`, which already
//!    satisfies `S = S0 S0*` but may have poles inside the disk;
//! 4. remove those poles by right multiplication with unitary Blaschke
//!    factors, after which the result is a polynomial of the input order;
//! 5. remove any remaining rank drops inside the disk with inverse Blaschke
//!    factors;
//! 6. undo the permutation and fix the right-unitary freedom.

use std::collections::BTreeMap;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fullrank::{canonicalize, factor_positive_definite_raw, scalar_factor, FactorOptions};
use crate::linalg::{
    adjugate, determinant, singular_values, smallest_right_singular, svd, unitarity_defect,
    unitary_with_first_column,
};
use crate::polylaurent::{factor_residual, max_abs, AnalyticPolyMatrix, CMatrix, LaurentMatrix};
use crate::roots::{cluster_roots, divide_linear, mul_linear, poly_abs_scale, poly_eval, poly_roots};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Options for the rank-deficient driver and its steps.
#[derive(Clone, Debug, PartialEq)]
pub struct RankDefOptions {
    /// Residual tolerance relative to the largest coefficient of `S`.
    pub tol: f64,
    /// Relative singular-value threshold for rank decisions.
    pub rank_tol: f64,
    /// Unit-circle samples for checks.
    pub grid_count: usize,
    /// Relative radius for root clustering and common-root cancellation.
    pub deflation_radius: f64,
    pub max_zero_fix_iters: usize,
    pub rng_seed: u64,
    /// Use this rank instead of estimating it.
    pub forced_rank: Option<usize>,
}

impl RankDefOptions {
    /// Defaults for an `m x m` input of the given order.
    pub fn for_problem(m: usize, order: usize) -> Self {
        Self {
            tol: 1e-9,
            rank_tol: 1e-11,
            grid_count: (4 * order + 1).max(128),
            deflation_radius: 1e-7,
            max_zero_fix_iters: 2 * order * m + 16,
            rng_seed: 0,
            forced_rank: None,
        }
    }

    fn validate(&self, m: usize, order: usize) -> Result<()> {
        if !(self.tol > 0.0 && self.rank_tol > 0.0 && self.deflation_radius > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        if self.max_zero_fix_iters < 2 * order * m {
            return Err(Error::InvalidInput(format!(
                "max_zero_fix_iters {} below 2*N*m = {}",
                self.max_zero_fix_iters,
                2 * order * m
            )));
        }
        Ok(())
    }

    fn full_rank_options(&self, order: usize) -> FactorOptions {
        FactorOptions {
            tol: self.tol,
            grid_count: self.grid_count.max(2 * order + 1),
            ..FactorOptions::for_order(order)
        }
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.rng_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt)
    }
}

/// Matrix of rational functions `N(z) / d(z)` with a polynomial numerator
/// and one monic scalar denominator shared by all entries.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalMatrix {
    numerator: LaurentMatrix,
    denominator: Vec<Complex64>,
    roots: Vec<Complex64>,
}

impl RationalMatrix {
    /// Builds `numerator / prod (z - r)` over the given denominator roots.
    pub fn new(numerator: AnalyticPolyMatrix, roots: Vec<Complex64>) -> Self {
        Self {
            numerator: numerator.into_laurent(),
            denominator: crate::roots::poly_from_roots(&roots),
            roots,
        }
    }

    pub fn from_polynomial(p: AnalyticPolyMatrix) -> Self {
        Self::new(p, Vec::new())
    }

    pub fn numerator(&self) -> &LaurentMatrix {
        &self.numerator
    }

    /// Monic denominator, ascending coefficients.
    pub fn denominator(&self) -> &[Complex64] {
        &self.denominator
    }

    pub fn denominator_roots(&self) -> &[Complex64] {
        &self.roots
    }

    pub fn rows(&self) -> usize {
        self.numerator.rows()
    }

    pub fn cols(&self) -> usize {
        self.numerator.cols()
    }

    pub fn eval(&self, z: Complex64) -> Result<CMatrix> {
        let d = poly_eval(&self.denominator, z);
        if d.norm() == 0.0 {
            return Err(Error::Domain("evaluation at a pole".into()));
        }
        Ok(self.numerator.eval(z)? / d)
    }

    /// Largest spectral norm over `count` uniform unit-circle samples.
    pub fn max_circle_norm(&self, count: usize) -> f64 {
        let num = self.numerator.eval_unit_grid(count);
        num.iter()
            .enumerate()
            .map(|(j, n)| {
                let z = unit(j, count);
                let d = poly_eval(&self.denominator, z).norm();
                singular_values(n).first().copied().unwrap_or(0.0) / d
            })
            .fold(0.0, f64::max)
    }

    fn numerator_at(&self, z: Complex64) -> (CMatrix, f64) {
        let val = self.numerator.eval(z).expect("analytic numerator");
        let r = z.norm();
        let natural = self
            .numerator
            .terms()
            .map(|(n, c)| max_abs(c) * r.powi(n))
            .sum::<f64>();
        // The floor keeps rounding noise in small coefficients from looking
        // significant near the origin.
        (val, natural + 1e-4 * self.numerator.max_abs_coeff())
    }

    /// Cancels denominator roots at which the whole numerator vanishes
    /// (relative to its natural magnitude there). Returns the largest
    /// relative division remainder.
    fn deflate(&mut self, radius: f64) -> f64 {
        let mut worst = 0.0f64;
        loop {
            let mut hit: Option<(usize, f64)> = None;
            for (i, &r) in self.roots.iter().enumerate() {
                let (val, scale) = self.numerator_at(r);
                let rel = max_abs(&val) / scale.max(f64::MIN_POSITIVE);
                if rel <= deflation_threshold(r, radius) && hit.is_none_or(|(_, h)| rel < h) {
                    hit = Some((i, rel));
                }
            }
            let Some((i, _)) = hit else { return worst };
            let r = self.roots.remove(i);
            let (num, rem) = divide_matrix_linear(&self.numerator, r);
            worst = worst.max(rem);
            self.numerator = num;
            self.denominator = divide_linear(&self.denominator, r).0;
        }
    }
}

/// Relative numerator size below which a denominator root counts as a
/// common root. Near the circle the numerator is less accurate and a pole
/// there would be unbounded on the circle, so the test is looser; deep
/// inside, genuine poles with small residues must survive.
fn deflation_threshold(r: Complex64, radius: f64) -> f64 {
    if (1.0 - r.norm()).abs() <= 1e-3 {
        radius
    } else {
        radius * 1e-2
    }
}

fn unit(j: usize, count: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / count as f64)
}

/// Divides every entry of an analytic matrix by `(z - a)`. Returns the
/// quotient and the largest remainder relative to the entry's scale.
fn divide_matrix_linear(m: &LaurentMatrix, a: Complex64) -> (LaurentMatrix, f64) {
    let mut worst = 0.0f64;
    let out = LaurentMatrix::from_fn(m.rows(), m.cols(), |i, j| {
        let p = m.entry(i, j);
        if p.is_zero() {
            return p;
        }
        let (lo, dense) = p.dense();
        let mut coeffs = vec![ZERO; lo as usize];
        coeffs.extend(dense);
        let scale = poly_abs_scale(&coeffs, a).max(coeffs.iter().fold(0.0, |x, c| x.max(c.norm())));
        let (q, rem) = divide_linear(&coeffs, a);
        worst = worst.max(rem / scale);
        crate::LaurentPoly::from_coeffs(0, &q)
    });
    (out, worst)
}

/// Multiplies column `j` of an analytic matrix by `c0 + c1 z`.
fn column_times_linear(m: &LaurentMatrix, j: usize, c0: Complex64, c1: Complex64) -> LaurentMatrix {
    let mut out = m.clone();
    for i in 0..m.rows() {
        let p = m.entry(i, j);
        if p.is_zero() {
            continue;
        }
        let (lo, dense) = p.dense();
        let prod = mul_linear(&dense, c0, c1);
        out.set_entry(i, j, &crate::LaurentPoly::from_coeffs(lo, &prod));
    }
    out
}

/// Which way a Blaschke factor moves a singularity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlaschkeDirection {
    /// Multiply by `(z - a) / (1 - conj(a) z)`.
    PoleRemoval,
    /// Multiply by `(1 - conj(a) z) / (z - a)`.
    ZeroRemoval,
}

/// One right multiplication by `unitary * diag(u(z), 1, ..., 1)` where the
/// scalar `u` acts on `column`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlaschkeOp {
    pub a: Complex64,
    pub column: usize,
    pub direction: BlaschkeDirection,
    pub unitary: Option<CMatrix>,
}

impl BlaschkeOp {
    /// The `k x k` multiplier evaluated at `z`.
    pub fn multiplier(&self, k: usize, z: Complex64) -> CMatrix {
        let num = z - self.a;
        let den = ONE - self.a.conj() * z;
        let u = match self.direction {
            BlaschkeDirection::PoleRemoval => num / den,
            BlaschkeDirection::ZeroRemoval => den / num,
        };
        let mut diag = CMatrix::identity(k, k);
        diag[(self.column, self.column)] = u;
        match &self.unitary {
            Some(w) => w * diag,
            None => diag,
        }
    }
}

/// Outcome of one named check.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub pass: bool,
    pub measured: f64,
    pub threshold: f64,
}

impl Verdict {
    pub fn at_most(measured: f64, threshold: f64) -> Self {
        Self {
            pass: measured <= threshold,
            measured,
            threshold,
        }
    }

    pub fn flag(pass: bool) -> Self {
        Self {
            pass,
            measured: if pass { 1.0 } else { 0.0 },
            threshold: 1.0,
        }
    }
}

/// Diagnostics of a factorization run or of an independent check.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FactorReport {
    pub detected_rank: usize,
    /// `pivot[i]` is the original index placed at position `i`.
    pub pivot: Vec<usize>,
    pub pole_ops: Vec<BlaschkeOp>,
    pub zero_ops: Vec<BlaschkeOp>,
    /// Coefficientwise residual relative to the largest coefficient of `S`.
    pub residual: f64,
    pub order: Option<i32>,
    pub rng_seed: u64,
    pub verdicts: BTreeMap<String, Verdict>,
}

impl FactorReport {
    pub fn passed(&self) -> bool {
        !self.verdicts.is_empty() && self.verdicts.values().all(|v| v.pass)
    }
}

fn random_angles(rng: &mut ChaCha8Rng, count: usize) -> Vec<Complex64> {
    (0..count)
        .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
        .collect()
}

fn check_square(s: &LaurentMatrix) -> Result<()> {
    if !s.is_square() {
        return Err(Error::DimensionMismatch(format!("{}x{} is not square", s.rows(), s.cols())));
    }
    Ok(())
}

fn order_of(s: &LaurentMatrix) -> usize {
    s.hi().map_or(0, |h| h.max(0) as usize)
}

/// Rank of `S` on the unit circle: the largest numerical rank over
/// `2N + 17` pseudo-random samples.
pub fn estimate_rank(s: &LaurentMatrix, opts: &RankDefOptions) -> Result<usize> {
    check_square(s)?;
    if s.is_zero() {
        return Ok(0);
    }
    let mut rng = opts.rng(1);
    let mut rank = 0;
    for z in random_angles(&mut rng, 2 * order_of(s) + 17) {
        let sv = singular_values(&s.eval(z)?);
        let top = sv[0];
        rank = rank.max(sv.iter().filter(|&&x| x > opts.rank_tol * top).count());
    }
    Ok(rank)
}

/// Greedy column choice by QR with column pivoting.
fn greedy_columns(a: &CMatrix, k: usize) -> Vec<usize> {
    let mut work = a.clone();
    let mut chosen = Vec::with_capacity(k);
    for _ in 0..k {
        let (best, norm) = (0..work.ncols())
            .filter(|j| !chosen.contains(j))
            .map(|j| (j, work.column(j).norm()))
            .fold((usize::MAX, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best == usize::MAX || norm <= 0.0 {
            break;
        }
        chosen.push(best);
        let q = work.column(best).into_owned() / Complex64::new(norm, 0.0);
        for j in 0..work.ncols() {
            let proj = q.dotc(&work.column(j));
            let upd = work.column(j) - &q * proj;
            work.set_column(j, &upd);
        }
    }
    chosen.sort_unstable();
    chosen
}

fn complete_permutation(lead: &[usize], m: usize) -> Vec<usize> {
    let mut p = lead.to_vec();
    p.extend((0..m).filter(|i| !lead.contains(i)));
    p
}

/// Symmetric permutation whose leading `k x k` block of `P S P^T` is best
/// conditioned on the unit circle among greedy pivoting candidates.
pub fn select_pivot(s: &LaurentMatrix, k: usize, opts: &RankDefOptions) -> Result<Vec<usize>> {
    check_square(s)?;
    let m = s.rows();
    if k == 0 || k > m {
        return Err(Error::InvalidInput(format!("rank {k} outside 1..={m}")));
    }
    let mut rng = opts.rng(2);
    let samples: Vec<CMatrix> = random_angles(&mut rng, (2 * order_of(s) + 17).max(32))
        .into_iter()
        .map(|z| s.eval(z))
        .collect::<Result<_>>()?;
    let scale = samples.iter().map(max_abs).fold(0.0, f64::max);

    let mut stacked = CMatrix::zeros(m * samples.len(), m);
    for (t, smp) in samples.iter().enumerate() {
        stacked.view_mut((t * m, 0), (m, m)).copy_from(smp);
    }
    let mut candidates = vec![greedy_columns(&stacked, k)];
    for smp in &samples {
        let c = greedy_columns(smp, k);
        if c.len() == k && !candidates.contains(&c) {
            candidates.push(c);
        }
    }
    if binomial(m, k) <= 64 {
        for c in subsets(m, k) {
            if !candidates.contains(&c) {
                candidates.push(c);
            }
        }
    }
    let screen = |idx: &[usize]| -> bool {
        let good = samples
            .iter()
            .filter(|smp| {
                let block = CMatrix::from_fn(k, k, |i, j| smp[(idx[i], idx[j])]);
                singular_values(&block).last().copied().unwrap_or(0.0) > opts.rank_tol * scale
            })
            .count();
        2 * good > samples.len()
    };
    // Among blocks that pass the screen, prefer the one whose determinant
    // keeps its zeros farthest from the unit circle.
    let mut best: Option<(Vec<usize>, f64)> = None;
    for c in candidates.iter().filter(|c| c.len() == k && screen(c)) {
        let margin = circle_margin(&s.select(c, c));
        if best.as_ref().is_none_or(|(_, b)| margin > *b) {
            best = Some((c.clone(), margin));
        }
    }
    let Some((best, _)) = best else {
        return Err(Error::Degenerate(
            "no leading block of the estimated rank is nonsingular on the circle".into(),
        ));
    };
    Ok(complete_permutation(&best, m))
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else { return out };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Smallest distance between the unit circle and a zero of `det B(z)`
/// for a square para-Hermitian `B`.
fn circle_margin(b: &LaurentMatrix) -> f64 {
    let k = b.rows() as i32;
    let order = b.hi().unwrap_or(0).max(0);
    let det = interpolate(-k * order, k * order, |z| {
        CMatrix::from_element(1, 1, determinant(&b.eval(z).unwrap()))
    })
    .entry(0, 0)
    .trim(1e-13);
    let Some(lo) = det.lo() else { return -1.0 };
    let coeffs: Vec<Complex64> = (lo..=det.hi().unwrap()).map(|n| det.coeff(n)).collect();
    poly_roots(&coeffs)
        .iter()
        .map(|r| (r.norm() - 1.0).abs())
        .fold(f64::INFINITY, f64::min)
}

fn permute(s: &LaurentMatrix, p: &[usize]) -> LaurentMatrix {
    s.select(p, p)
}

/// Checks the rank identity `S10 S00^-1 S01 = S11` of the permuted blocks
/// at the well-conditioned samples of a uniform grid.
pub fn check_rank_identity(s: &LaurentMatrix, p: &[usize], k: usize, opts: &RankDefOptions) -> Result<bool> {
    check_square(s)?;
    let m = s.rows();
    if k >= m {
        return Ok(true);
    }
    let sp = permute(s, p);
    let scale = s.max_abs_coeff();
    let mut checked = 0;
    for smp in sp.eval_unit_grid(opts.grid_count) {
        let s00 = smp.view((0, 0), (k, k)).into_owned();
        let sv = singular_values(&s00);
        if sv.is_empty() || *sv.last().unwrap() <= 1e-8 * sv[0] {
            continue;
        }
        let Some(inv) = s00.clone().try_inverse() else { continue };
        let s10 = smp.view((k, 0), (m - k, k));
        let s01 = smp.view((0, k), (k, m - k));
        let s11 = smp.view((k, k), (m - k, m - k));
        let dev = max_abs(&(s10 * inv * s01 - s11));
        if dev > opts.tol * scale.max(f64::MIN_POSITIVE) {
            return Ok(false);
        }
        checked += 1;
    }
    Ok(checked > 0)
}

/// Interpolates a Laurent matrix from pointwise values on a grid large
/// enough for the stated power window.
fn interpolate<F: FnMut(Complex64) -> CMatrix>(lo: i32, hi: i32, mut f: F) -> LaurentMatrix {
    let count = ((hi - lo + 1) as usize).max(1).next_power_of_two() * 2;
    let samples: Vec<CMatrix> = (0..count).map(|j| f(unit(j, count))).collect();
    LaurentMatrix::from_unit_grid(&samples, lo)
}

/// Polynomial determinant of a square analytic matrix.
fn det_poly(f: &LaurentMatrix) -> Vec<Complex64> {
    let k = f.rows();
    let order = f.hi().unwrap_or(0).max(0);
    let det = interpolate(0, k as i32 * order, |z| {
        CMatrix::from_element(1, 1, determinant(&f.eval(z).unwrap()))
    });
    let scalar = det.entry(0, 0);
    let scale = scalar.max_abs();
    let trimmed = scalar.trim(1e-13);
    if trimmed.is_zero() || scale == 0.0 {
        return Vec::new();
    }
    (0..=trimmed.hi().unwrap()).map(|n| trimmed.coeff(n)).collect()
}

/// `sigma10 = S10 (S00-)^-1` as a rational matrix.
///
/// With `delta(z) = det S00+(z)` of degree `D`, the denominator is the
/// monic reflection `z^D det S00-(z) / conj(delta_0)` (its roots are the
/// reflections of the zeros of `delta`), possibly times a power of `z`
/// that makes the numerator analytic. Common numerator/denominator roots
/// are cancelled.
pub fn form_sigma10(
    s10: &LaurentMatrix,
    s00plus: &AnalyticPolyMatrix,
    opts: &RankDefOptions,
) -> Result<RationalMatrix> {
    let k = s00plus.rows();
    if s00plus.cols() != k || s10.cols() != k {
        return Err(Error::DimensionMismatch("S10 and S00+ are incompatible".into()));
    }
    let delta = det_poly(s00plus);
    if delta.is_empty() {
        return Err(Error::Internal("det S00+ vanishes identically".into()));
    }
    let deg = delta.len() - 1;
    let d0c = delta[0].conj();
    let mut denominator: Vec<Complex64> = (0..=deg).map(|j| delta[deg - j].conj() / d0c).collect();

    let n0 = s00plus.hi().unwrap_or(0).max(0);
    let lo = s10.lo().unwrap_or(0) - (k as i32 - 1) * n0 + deg as i32;
    let hi = s10.hi().unwrap_or(0) + deg as i32;
    let numer = if s10.rows() == 0 {
        LaurentMatrix::zeros(0, k)
    } else {
        interpolate(lo.min(hi), hi.max(lo), |z| {
            let minus = s00plus.eval(z).unwrap().adjoint();
            let zd = z.powi(deg as i32) / d0c;
            s10.eval(z).unwrap() * adjugate(&minus) * zd
        })
        .trim(1e-13)
    };
    let mut numer = numer;
    let mut roots = poly_roots(&denominator);
    if let Some(low) = numer.lo().filter(|&l| l < 0) {
        let shift = -low;
        numer = numer.shift(shift);
        let mut padded = vec![ZERO; shift as usize];
        padded.extend(denominator);
        denominator = padded;
        roots.extend(std::iter::repeat_n(ZERO, shift as usize));
    }
    let mut r = RationalMatrix {
        numerator: numer,
        denominator,
        roots,
    };
    r.deflate(opts.deflation_radius);
    Ok(r)
}

/// Stacks `[S00+; sigma10]` over the common denominator of `sigma10`.
pub fn assemble_s0(s00plus: &AnalyticPolyMatrix, sigma10: &RationalMatrix) -> Result<RationalMatrix> {
    if s00plus.cols() != sigma10.cols() {
        return Err(Error::DimensionMismatch(format!(
            "S00+ has {} columns, sigma10 has {}",
            s00plus.cols(),
            sigma10.cols()
        )));
    }
    let den = LaurentMatrix::from_fn(1, 1, |_, _| crate::LaurentPoly::from_coeffs(0, &sigma10.denominator));
    let top = s00plus.mul(&LaurentMatrix::identity(s00plus.rows()))?;
    let top = LaurentMatrix::from_fn(top.rows(), top.cols(), |i, j| &top.entry(i, j) * &den.entry(0, 0));
    Ok(RationalMatrix {
        numerator: top.vstack(&sigma10.numerator)?,
        denominator: sigma10.denominator.clone(),
        roots: sigma10.roots.clone(),
    })
}

/// Removes every pole inside the disk by right multiplication with
/// `U diag((z - a)/(1 - conj(a) z), 1, ..., 1)`. The constant unitary `U`
/// turns the leading singular direction of the numerator at the pole into
/// the first column, so each step removes one order of the pole.
pub fn remove_inner_poles(s0: &RationalMatrix, opts: &RankDefOptions) -> Result<(RationalMatrix, Vec<BlaschkeOp>)> {
    let mut r = s0.clone();
    let k = r.cols();
    let mut ops = Vec::new();
    let cap = 4 * (r.roots.len() + 1) * (k + 1);
    r.deflate(opts.deflation_radius);
    for _ in 0..cap {
        if let Some(b) = r
            .roots
            .iter()
            .find(|a| (a.norm() - 1.0).abs() < opts.deflation_radius)
        {
            return Err(Error::numerical(
                format!("irremovable pole on the unit circle near {b}"),
                (b.norm() - 1.0).abs(),
            ));
        }
        let Some(a) = r
            .roots
            .iter()
            .copied()
            .filter(|a| a.norm() < 1.0)
            .min_by(|x, y| x.norm().total_cmp(&y.norm()))
        else {
            return Ok((r, ops));
        };
        let (val, _) = r.numerator_at(a);
        let dec = svd(&val);
        let y: Vec<Complex64> = dec.v.column(0).iter().copied().collect();
        let u = unitary_with_first_column(&y);
        let mut num = r.numerator.mul_const(&u)?;
        num = column_times_linear(&num, 0, -a, ONE);
        for j in 1..k {
            num = column_times_linear(&num, j, ONE, -a.conj());
        }
        r.numerator = num;
        r.denominator = mul_linear(&r.denominator, ONE, -a.conj());
        if a.norm() > 0.0 {
            r.roots.push(a.conj().inv());
            // Keep the denominator monic.
            let lead = *r.denominator.last().expect("nonempty");
            r.denominator.iter_mut().for_each(|c| *c /= lead);
            r.numerator = r.numerator.scale(lead.inv());
        } else {
            r.denominator.pop();
        }
        ops.push(BlaschkeOp {
            a,
            column: 0,
            direction: BlaschkeDirection::PoleRemoval,
            unitary: Some(u),
        });
        r.deflate(opts.deflation_radius);
    }
    Err(Error::numerical("pole removal did not terminate", f64::NAN))
}

/// Divides the numerator by the denominator, which must leave a polynomial
/// of order at most `order`.
pub fn finalize_polynomial(r: &RationalMatrix, order: usize, opts: &RankDefOptions) -> Result<AnalyticPolyMatrix> {
    if let Some(a) = r.roots.iter().find(|a| a.norm() < 1.0) {
        return Err(Error::Precondition(format!("denominator root {a} inside the disk")));
    }
    let mut q = r.numerator.clone();
    for &root in &r.roots {
        q = divide_matrix_linear(&q, root).0;
    }
    let den = LaurentMatrix::from_fn(1, 1, |_, _| crate::LaurentPoly::from_coeffs(0, &r.denominator));
    let back = LaurentMatrix::from_fn(q.rows(), q.cols(), |i, j| &q.entry(i, j) * &den.entry(0, 0));
    let scale = r.numerator.max_abs_coeff().max(f64::MIN_POSITIVE);
    let rem = back.max_abs_diff(&r.numerator) / scale;
    if rem > opts.tol {
        return Err(Error::numerical("denominator does not divide the numerator", rem));
    }
    let qscale = q.max_abs_coeff();
    let mut terms: Vec<(i32, CMatrix)> = Vec::new();
    for (n, c) in q.terms() {
        if n > order as i32 {
            if max_abs(c) > opts.tol.sqrt() * qscale {
                return Err(Error::numerical(
                    format!("factor has a significant term of power {n} above the order {order}"),
                    max_abs(c) / qscale,
                ));
            }
            continue;
        }
        terms.push((n, c.clone()));
    }
    AnalyticPolyMatrix::new(LaurentMatrix::from_terms(q.rows(), q.cols(), terms)?)
}

fn random_compression(rng: &mut ChaCha8Rng, k: usize, m: usize) -> CMatrix {
    CMatrix::from_fn(k, m, |_, _| {
        Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

fn natural_scale(f: &LaurentMatrix, a: Complex64) -> f64 {
    let r = a.norm();
    f.terms().map(|(n, c)| max_abs(c) * r.powi(n)).sum()
}

/// Points strictly inside the disk where the `m x k` analytic matrix drops
/// column rank, found as common roots of `det(L1 F)` and `det(L2 F)` for
/// two random compressions and confirmed by a singular-value test.
pub fn find_rank_drop_points(f: &AnalyticPolyMatrix, opts: &RankDefOptions) -> Result<Vec<Complex64>> {
    let (m, k) = f.shape();
    if k == 0 || f.is_zero() {
        return Ok(Vec::new());
    }
    if m < k {
        return Err(Error::DimensionMismatch(format!("{m}x{k} cannot have full column rank")));
    }
    let mut rng = opts.rng(3);
    // Isolated drops are never hit by a random point.
    let probe = Complex64::from_polar(rng.random_range(0.2..0.8), rng.random_range(0.0..std::f64::consts::TAU));
    if smallest_right_singular(&f.eval(probe)?).0 <= opts.rank_tol * natural_scale(f, probe) {
        return Err(Error::Degenerate(format!("{m}x{k} factor has column rank below {k} everywhere")));
    }
    let inside = |roots: Vec<Complex64>| -> Vec<Complex64> {
        roots
            .into_iter()
            .filter(|a| a.norm() < 1.0 - opts.deflation_radius)
            .collect()
    };
    let mut sets = Vec::new();
    for _ in 0..2 {
        let l = random_compression(&mut rng, k, m);
        let compressed = LaurentMatrix::constant(l).mul(f)?;
        let det = det_poly(&compressed);
        sets.push(inside(poly_roots(&det)));
    }
    let mut candidates = Vec::new();
    for &a in &sets[0] {
        let partner = sets[1]
            .iter()
            .copied()
            .min_by(|x, y| (x - a).norm().total_cmp(&(y - a).norm()));
        if let Some(b) = partner {
            if (a - b).norm() <= opts.deflation_radius * a.norm().max(1.0) {
                candidates.push((a + b) * 0.5);
            }
        }
    }
    let mut points = Vec::new();
    for cl in cluster_roots(&candidates, opts.deflation_radius) {
        let a = cl.center;
        let (smin, _) = smallest_right_singular(&f.eval(a)?);
        if smin <= opts.rank_tol * natural_scale(f, a) {
            points.push(a);
        }
    }
    Ok(points)
}

/// Refines a rank-drop point by Gauss-Newton on `|F(z) v|` with `v` the
/// smallest right singular vector at the current point.
fn polish_rank_drop(f: &LaurentMatrix, mut a: Complex64) -> Complex64 {
    let deriv = LaurentMatrix::from_terms(
        f.rows(),
        f.cols(),
        f.terms().filter(|(n, _)| *n > 0).map(|(n, c)| (n - 1, c * Complex64::new(n as f64, 0.0))),
    )
    .expect("finite");
    for _ in 0..4 {
        let Ok(val) = f.eval(a) else { break };
        let (smin, v) = smallest_right_singular(&val);
        let v = DVector::from_vec(v);
        let g = &val * &v;
        let dg = deriv.eval(a).expect("analytic") * &v;
        let denom = dg.norm_squared();
        if denom == 0.0 {
            break;
        }
        let step = dg.dotc(&g) / denom;
        let next = a - step;
        let Ok(nv) = f.eval(next) else { break };
        if smallest_right_singular(&nv).0 < smin {
            a = next;
        } else {
            break;
        }
    }
    a
}

/// Removes one rank drop at `a` (inside the disk): rotates the null
/// direction of `F(a)` into the first column, divides that column by
/// `(z - a)` and multiplies it by `(1 - conj(a) z)`.
pub fn fix_rank_drop(
    f: &AnalyticPolyMatrix,
    a: Complex64,
    opts: &RankDefOptions,
) -> Result<(AnalyticPolyMatrix, BlaschkeOp)> {
    if a.norm() >= 1.0 {
        return Err(Error::Precondition(format!("rank-drop point {a} is not inside the disk")));
    }
    let (smin, _) = smallest_right_singular(&f.eval(a)?);
    if smin > opts.rank_tol * natural_scale(f, a) {
        return Err(Error::Precondition(format!("F has full column rank at {a}")));
    }
    let a = polish_rank_drop(f, a);
    let (_, v) = smallest_right_singular(&f.eval(a)?);
    let u = unitary_with_first_column(&v);
    let g = f.mul_const(&u)?;
    let first = g.column(0);
    let (q, rem) = divide_matrix_linear(&first, a);
    if rem > opts.tol {
        return Err(Error::numerical(format!("first column not divisible by (z - a) at a = {a}"), rem));
    }
    let q = column_times_linear(&q, 0, ONE, -a.conj());
    let mut out = g.into_laurent();
    for i in 0..out.rows() {
        out.set_entry(i, 0, &q.entry(i, 0));
    }
    Ok((
        AnalyticPolyMatrix::new(out)?,
        BlaschkeOp {
            a,
            column: 0,
            direction: BlaschkeDirection::ZeroRemoval,
            unitary: Some(u),
        },
    ))
}

fn unpermute_rows(f: &LaurentMatrix, p: &[usize]) -> LaurentMatrix {
    let mut inv = vec![0; p.len()];
    for (i, &pi) in p.iter().enumerate() {
        inv[pi] = i;
    }
    f.select(&inv, &(0..f.cols()).collect::<Vec<_>>())
}

/// Spectral factor `S+` (`m x k`, analytic, full column rank inside the
/// disk, order of `S`) of a nonnegative para-Hermitian `S` of rank `k`.
///
/// The returned report always carries the verification verdicts; a
/// factor that misses the residual tolerance is returned with a failing
/// verdict rather than as an error.
pub fn spectral_factor(s: &LaurentMatrix, opts: &RankDefOptions) -> Result<(AnalyticPolyMatrix, FactorReport)> {
    check_square(s)?;
    if s.is_zero() {
        return Err(Error::InvalidInput("S is identically zero".into()));
    }
    if !s.is_parahermitian(opts.tol)? {
        return Err(Error::InvalidInput("S is not para-Hermitian".into()));
    }
    let m = s.rows();
    let order = order_of(s);
    opts.validate(m, order)?;
    let estimated = estimate_rank(s, opts)?;
    let k = match opts.forced_rank {
        Some(k) if k > estimated => {
            return Err(Error::InvalidInput(format!("requested rank {k} exceeds the numerical rank {estimated}")));
        }
        Some(k) => k,
        None => estimated,
    };
    if k == 0 || k > m {
        return Err(Error::InvalidInput(format!("rank {k} outside 1..={m}")));
    }
    let pivot = if k == m { (0..m).collect() } else { select_pivot(s, k, opts)? };
    let sp = permute(s, &pivot);
    let lead: Vec<usize> = (0..k).collect();
    let s00 = sp.select(&lead, &lead);
    let s00plus = if k == 1 {
        let q = scalar_factor(&s00.entry(0, 0), opts.tol)?;
        AnalyticPolyMatrix::new(LaurentMatrix::from_fn(1, 1, |_, _| q.clone()))?
    } else {
        factor_positive_definite_raw(&s00, &opts.full_rank_options(order))?.0
    };

    let mut report = FactorReport {
        detected_rank: k,
        pivot: pivot.clone(),
        rng_seed: opts.rng_seed,
        ..Default::default()
    };
    let mut factor = if k == m {
        s00plus
    } else {
        let rest: Vec<usize> = (k..m).collect();
        let s10 = sp.select(&rest, &lead);
        let sigma = form_sigma10(&s10, &s00plus, opts)?;
        let s0 = assemble_s0(&s00plus, &sigma)?;
        let (s0plus, ops) = remove_inner_poles(&s0, opts)?;
        report.pole_ops = ops;
        finalize_polynomial(&s0plus, order, opts)?
    };

    let mut fixed = false;
    for _ in 0..opts.max_zero_fix_iters {
        let points = find_rank_drop_points(&factor, opts)?;
        let Some(&a) = points.first() else {
            fixed = true;
            break;
        };
        let (next, op) = fix_rank_drop(&factor, a, opts)?;
        factor = next;
        report.zero_ops.push(op);
    }
    if !fixed {
        return Err(Error::numerical("rank-drop removal hit the iteration cap", f64::NAN));
    }

    let factor = AnalyticPolyMatrix::new(unpermute_rows(&factor, &pivot))?;
    let factor = canonicalize(&factor)?.factor;
    let check = verify_factorization(s, &factor, opts);
    report.residual = check.residual;
    report.order = factor.order();
    report.verdicts = check.verdicts;
    Ok((factor, report))
}

/// Independent check of `S = S+ (S+)*`: coefficient and grid residuals,
/// rank drops inside the disk and the order of the factor.
pub fn verify_factorization(s: &LaurentMatrix, splus: &AnalyticPolyMatrix, opts: &RankDefOptions) -> FactorReport {
    let mut report = FactorReport {
        detected_rank: splus.cols(),
        rng_seed: opts.rng_seed,
        order: splus.order(),
        ..Default::default()
    };
    if !s.is_square() || s.rows() != splus.rows() {
        report.residual = f64::INFINITY;
        report.verdicts.insert("invalid_input".into(), Verdict::flag(false));
        return report;
    }
    let scale = s.max_abs_coeff().max(f64::MIN_POSITIVE);
    let product = splus.mul(&splus.adjoint()).expect("shapes checked");
    report.residual = s.max_abs_diff(&product) / scale;
    report
        .verdicts
        .insert("coefficient_residual".into(), Verdict::at_most(report.residual, opts.tol));
    let grid = s.sub(&product).expect("shapes checked").eval_unit_grid(opts.grid_count);
    let grid_res = grid.iter().map(max_abs).fold(0.0, f64::max) / scale;
    report
        .verdicts
        .insert("grid_residual".into(), Verdict::at_most(grid_res, opts.tol * (2 * order_of(s) + 1) as f64));
    let drops = find_rank_drop_points(splus, opts).map(|p| p.len()).unwrap_or(usize::MAX);
    report
        .verdicts
        .insert("rank_drop_points".into(), Verdict::at_most(drops as f64, 0.0));
    let order_ok = splus.order().unwrap_or(-1) == s.order().unwrap_or(-1);
    report.verdicts.insert("order".into(), Verdict::flag(order_ok));
    report
}

/// Finds the constant unitary `U` with `G = F U`, if there is one.
///
/// `U(z) = (F^H F)^-1 F^H G` is evaluated at eight well-conditioned
/// unit-circle points; the mean is returned when the samples agree and the
/// mean is unitary, both within `tol`.
pub fn compare_factors(f: &AnalyticPolyMatrix, g: &AnalyticPolyMatrix, tol: f64) -> Result<Option<CMatrix>> {
    if f.shape() != g.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            f.rows(),
            f.cols(),
            g.rows(),
            g.cols()
        )));
    }
    let samples = compare_samples(f, g)?;
    let mean = samples.iter().fold(CMatrix::zeros(f.cols(), f.cols()), |acc, u| acc + u)
        / Complex64::new(samples.len() as f64, 0.0);
    let spread = samples.iter().map(|u| max_abs(&(u - &mean))).fold(0.0, f64::max);
    if spread <= tol && unitarity_defect(&mean) <= tol {
        Ok(Some(mean))
    } else {
        Ok(None)
    }
}

/// Pointwise `U(z)` at eight well-conditioned unit-circle samples.
pub(crate) fn compare_samples(f: &AnalyticPolyMatrix, g: &AnalyticPolyMatrix) -> Result<Vec<CMatrix>> {
    const WANT: usize = 8;
    const GRID: usize = 64;
    let mut out = Vec::with_capacity(WANT);
    // Visit the grid in a stride that spreads the chosen points.
    for t in 0..GRID {
        let j = (t * 37 + 5) % GRID;
        let z = Complex64::from_polar(1.0, std::f64::consts::TAU * (j as f64 + 0.3) / GRID as f64);
        let fz = f.eval(z)?;
        let dec = svd(&fz);
        let (Some(&top), Some(&low)) = (dec.sigma.first(), dec.sigma.last()) else { continue };
        if dec.sigma.len() < f.cols() || low <= 1e-8 * top {
            continue;
        }
        let inv_sigma = CMatrix::from_diagonal(&DVector::from_iterator(
            dec.sigma.len(),
            dec.sigma.iter().map(|s| Complex64::new(1.0 / s, 0.0)),
        ));
        let pinv = &dec.v * inv_sigma * dec.u.adjoint();
        out.push(pinv * g.eval(z)?);
        if out.len() == WANT {
            break;
        }
    }
    if out.is_empty() {
        return Err(Error::Indeterminate("factor is ill-conditioned at every sample".into()));
    }
    Ok(out)
}

/// Residual of a rational factor against `S` on the unit circle:
/// `max |R R^H - S|` over `count` samples.
pub fn rational_product_residual(r: &RationalMatrix, s: &LaurentMatrix, count: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for (j, smp) in s.eval_unit_grid(count).iter().enumerate() {
        let rz = r.eval(unit(j, count))?;
        worst = worst.max(max_abs(&(&rz * rz.adjoint() - smp)));
    }
    Ok(worst)
}

/// Coefficientwise residual of a polynomial factor, relative to `S`.
pub fn relative_residual(s: &LaurentMatrix, f: &LaurentMatrix) -> Result<f64> {
    Ok(factor_residual(s, f)? / s.max_abs_coeff().max(f64::MIN_POSITIVE))
}

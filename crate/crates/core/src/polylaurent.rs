//! Scalar and matrix Laurent polynomials with complex coefficients.
//!
//! Coefficients are stored sparsely by power. Exact zeros are never stored,
//! so an empty map is the zero polynomial and the first/last stored powers
//! are the trailing/leading powers.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Deref, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Entry type of every coefficient.
pub type ComplexScalar = Complex64;
/// Dense complex matrix used for coefficients and point evaluations.
pub type CMatrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

fn is_finite(z: &Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Scalar Laurent polynomial `sum_n c_n z^n`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LaurentPoly {
    terms: BTreeMap<i32, Complex64>,
}

impl LaurentPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Complex64) -> Self {
        Self::monomial(c, 0)
    }

    pub fn monomial(c: Complex64, power: i32) -> Self {
        let mut p = Self::zero();
        p.set(power, c);
        p
    }

    /// Builds `sum_i coeffs[i] z^(lo + i)`.
    pub fn from_coeffs(lo: i32, coeffs: &[Complex64]) -> Self {
        let mut p = Self::zero();
        for (i, c) in coeffs.iter().enumerate() {
            p.set(lo + i as i32, *c);
        }
        p
    }

    /// Same as [`LaurentPoly::from_coeffs`] for real coefficients.
    pub fn from_real(lo: i32, coeffs: &[f64]) -> Self {
        let c: Vec<Complex64> = coeffs.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_coeffs(lo, &c)
    }

    pub fn from_terms<I: IntoIterator<Item = (i32, Complex64)>>(terms: I) -> Result<Self> {
        let mut p = Self::zero();
        for (n, c) in terms {
            if !is_finite(&c) {
                return Err(Error::InvalidInput(format!("non-finite coefficient at power {n}")));
            }
            let acc = p.coeff(n) + c;
            p.set(n, acc);
        }
        Ok(p)
    }

    fn set(&mut self, power: i32, c: Complex64) {
        debug_assert!(is_finite(&c), "non-finite coefficient");
        if c == ZERO {
            self.terms.remove(&power);
        } else {
            self.terms.insert(power, c);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, power: i32) -> Complex64 {
        self.terms.get(&power).copied().unwrap_or(ZERO)
    }

    pub fn terms(&self) -> impl Iterator<Item = (i32, Complex64)> + '_ {
        self.terms.iter().map(|(&n, &c)| (n, c))
    }

    pub fn lo(&self) -> Option<i32> {
        self.terms.keys().next().copied()
    }

    pub fn hi(&self) -> Option<i32> {
        self.terms.keys().next_back().copied()
    }

    /// Largest power present; `None` for the zero polynomial.
    pub fn order(&self) -> Option<i32> {
        self.hi()
    }

    pub fn is_analytic(&self) -> bool {
        self.lo().is_none_or(|lo| lo >= 0)
    }

    /// Dense coefficients for powers `lo..=hi`; empty for zero.
    pub fn dense(&self) -> (i32, Vec<Complex64>) {
        match (self.lo(), self.hi()) {
            (Some(lo), Some(hi)) => (lo, (lo..=hi).map(|n| self.coeff(n)).collect()),
            _ => (0, Vec::new()),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |acc, c| acc.max(c.norm()))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut p = Self::zero();
        for (n, v) in self.terms() {
            p.set(n, v * c);
        }
        p
    }

    /// Multiplication by `z^power`.
    pub fn shift(&self, power: i32) -> Self {
        Self {
            terms: self.terms.iter().map(|(&n, &c)| (n + power, c)).collect(),
        }
    }

    /// Para-Hermitian conjugate `conj(f(1/conj(z)))`.
    pub fn adjoint(&self) -> Self {
        Self {
            terms: self.terms.iter().map(|(&n, c)| (-n, c.conj())).collect(),
        }
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        if z == ZERO && self.lo().is_some_and(|lo| lo < 0) {
            return Err(Error::Domain("z = 0 with negative powers present".into()));
        }
        let (lo, hi) = match (self.lo(), self.hi()) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => return Ok(ZERO),
        };
        let mut pos = ZERO;
        for n in (0..=hi.max(-1)).rev() {
            pos = pos * z + self.coeff(n);
        }
        let mut neg = ZERO;
        if lo < 0 {
            let w = z.inv();
            for n in lo..=-1 {
                neg = (neg + self.coeff(n)) * w;
            }
        }
        Ok(pos + neg)
    }

    /// Removes edge coefficients whose magnitude is at most `tol` times the
    /// largest coefficient magnitude.
    pub fn trim(&self, tol: f64) -> Self {
        let thresh = tol * self.max_abs();
        let mut p = self.clone();
        while let Some((&n, c)) = p.terms.iter().next() {
            if c.norm() > thresh {
                break;
            }
            p.terms.remove(&n);
        }
        while let Some((&n, c)) = p.terms.iter().next_back() {
            if c.norm() > thresh {
                break;
            }
            p.terms.remove(&n);
        }
        p
    }
}

impl Add for &LaurentPoly {
    type Output = LaurentPoly;
    fn add(self, rhs: &LaurentPoly) -> LaurentPoly {
        let mut p = self.clone();
        for (n, c) in rhs.terms() {
            let v = p.coeff(n) + c;
            p.set(n, v);
        }
        p
    }
}

impl Sub for &LaurentPoly {
    type Output = LaurentPoly;
    fn sub(self, rhs: &LaurentPoly) -> LaurentPoly {
        self + &(-rhs)
    }
}

impl Neg for &LaurentPoly {
    type Output = LaurentPoly;
    fn neg(self) -> LaurentPoly {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul for &LaurentPoly {
    type Output = LaurentPoly;
    fn mul(self, rhs: &LaurentPoly) -> LaurentPoly {
        let mut acc: BTreeMap<i32, Complex64> = BTreeMap::new();
        for (a, ca) in self.terms() {
            for (b, cb) in rhs.terms() {
                *acc.entry(a + b).or_insert(ZERO) += ca * cb;
            }
        }
        let mut p = LaurentPoly::zero();
        for (n, c) in acc {
            p.set(n, c);
        }
        p
    }
}

impl fmt::Display for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms()
            .map(|(n, c)| format!("({:.6}{:+.6}i)z^{}", c.re, c.im, n))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Matrix-valued Laurent polynomial `sum_n C_n z^n` with `rows x cols`
/// coefficient matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct LaurentMatrix {
    rows: usize,
    cols: usize,
    terms: BTreeMap<i32, CMatrix>,
}

impl LaurentMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            terms: BTreeMap::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(CMatrix::identity(n, n))
    }

    pub fn constant(c: CMatrix) -> Self {
        Self::monomial(c, 0)
    }

    pub fn monomial(c: CMatrix, power: i32) -> Self {
        let mut m = Self::zeros(c.nrows(), c.ncols());
        m.insert(power, c);
        m
    }

    /// Builds a matrix from `(power, coefficient)` pairs. Repeated powers are
    /// summed. Fails on shape mismatch or non-finite entries.
    pub fn from_terms<I: IntoIterator<Item = (i32, CMatrix)>>(
        rows: usize,
        cols: usize,
        terms: I,
    ) -> Result<Self> {
        let mut m = Self::zeros(rows, cols);
        for (n, c) in terms {
            if c.shape() != (rows, cols) {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient at power {n} is {}x{}, expected {rows}x{cols}",
                    c.nrows(),
                    c.ncols()
                )));
            }
            if !c.iter().all(is_finite) {
                return Err(Error::InvalidInput(format!("non-finite coefficient at power {n}")));
            }
            let sum = m.coeff_or_zero(n) + c;
            m.insert(n, sum);
        }
        Ok(m)
    }

    /// Builds a matrix entry by entry.
    pub fn from_fn<F: FnMut(usize, usize) -> LaurentPoly>(rows: usize, cols: usize, mut f: F) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set_entry(i, j, &f(i, j));
            }
        }
        m
    }

    fn insert(&mut self, power: i32, c: CMatrix) {
        debug_assert_eq!(c.shape(), (self.rows, self.cols));
        if c.iter().all(|z| *z == ZERO) {
            self.terms.remove(&power);
        } else {
            self.terms.insert(power, c);
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn lo(&self) -> Option<i32> {
        self.terms.keys().next().copied()
    }

    pub fn hi(&self) -> Option<i32> {
        self.terms.keys().next_back().copied()
    }

    /// Largest power with a nonzero coefficient; `None` for the zero matrix.
    pub fn order(&self) -> Option<i32> {
        self.hi()
    }

    /// `hi - lo`, or 0 for the zero matrix.
    pub fn span(&self) -> usize {
        match (self.lo(), self.hi()) {
            (Some(lo), Some(hi)) => (hi - lo) as usize,
            _ => 0,
        }
    }

    pub fn coeff(&self, power: i32) -> Option<&CMatrix> {
        self.terms.get(&power)
    }

    pub fn coeff_or_zero(&self, power: i32) -> CMatrix {
        self.terms
            .get(&power)
            .cloned()
            .unwrap_or_else(|| CMatrix::zeros(self.rows, self.cols))
    }

    pub fn terms(&self) -> impl Iterator<Item = (i32, &CMatrix)> + '_ {
        self.terms.iter().map(|(&n, c)| (n, c))
    }

    pub fn entry(&self, i: usize, j: usize) -> LaurentPoly {
        LaurentPoly::from_terms(self.terms().map(|(n, c)| (n, c[(i, j)]))).expect("finite coefficients")
    }

    pub fn set_entry(&mut self, i: usize, j: usize, p: &LaurentPoly) {
        let mut powers: Vec<i32> = self.terms.keys().copied().collect();
        powers.extend(p.terms().map(|(n, _)| n));
        powers.sort_unstable();
        powers.dedup();
        for n in powers {
            let mut c = self.coeff_or_zero(n);
            c[(i, j)] = p.coeff(n);
            self.insert(n, c);
        }
    }

    /// Largest coefficient magnitude, the reference scale for relative
    /// tolerances.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |acc, c| acc.max(max_abs(c)))
    }

    /// Largest coefficientwise deviation from `other`.
    pub fn max_abs_diff(&self, other: &LaurentMatrix) -> f64 {
        let mut powers: Vec<i32> = self.terms.keys().chain(other.terms.keys()).copied().collect();
        powers.sort_unstable();
        powers.dedup();
        powers
            .into_iter()
            .map(|n| max_abs(&(self.coeff_or_zero(n) - other.coeff_or_zero(n))))
            .fold(0.0, f64::max)
    }

    pub fn is_analytic(&self) -> bool {
        self.lo().is_none_or(|lo| lo >= 0)
    }

    /// Para-Hermitian adjoint: the coefficient at power `n` is the
    /// conjugate transpose of the coefficient at power `-n`.
    pub fn adjoint(&self) -> Self {
        Self {
            rows: self.cols,
            cols: self.rows,
            terms: self.terms.iter().map(|(&n, c)| (-n, c.adjoint())).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            rows: self.cols,
            cols: self.rows,
            terms: self.terms.iter().map(|(&n, c)| (n, c.transpose())).collect(),
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut m = Self::zeros(self.rows, self.cols);
        for (n, v) in self.terms() {
            m.insert(n, v * c);
        }
        m
    }

    /// Multiplication by `z^power`.
    pub fn shift(&self, power: i32) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            terms: self.terms.iter().map(|(&n, c)| (n + power, c.clone())).collect(),
        }
    }

    /// Coefficient convolution.
    pub fn mul(&self, rhs: &LaurentMatrix) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut acc: BTreeMap<i32, CMatrix> = BTreeMap::new();
        for (a, ca) in self.terms() {
            for (b, cb) in rhs.terms() {
                let prod = ca * cb;
                acc.entry(a + b)
                    .and_modify(|m| *m += &prod)
                    .or_insert(prod);
            }
        }
        let mut m = Self::zeros(self.rows, rhs.cols);
        for (n, c) in acc {
            m.insert(n, c);
        }
        Ok(m)
    }

    /// Right multiplication by a constant matrix.
    pub fn mul_const(&self, rhs: &CMatrix) -> Result<Self> {
        self.mul(&Self::constant(rhs.clone()))
    }

    pub fn add(&self, rhs: &LaurentMatrix) -> Result<Self> {
        if self.shape() != rhs.shape() {
            return Err(Error::DimensionMismatch(format!(
                "cannot add {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut m = self.clone();
        for (n, c) in rhs.terms() {
            let sum = m.coeff_or_zero(n) + c;
            m.insert(n, sum);
        }
        Ok(m)
    }

    pub fn sub(&self, rhs: &LaurentMatrix) -> Result<Self> {
        self.add(&rhs.scale(Complex64::new(-1.0, 0.0)))
    }

    /// `sum_n C_n z^n`, accumulated by Horner's rule separately over the
    /// nonnegative powers (in `z`) and the negative powers (in `1/z`).
    pub fn eval(&self, z: Complex64) -> Result<CMatrix> {
        let (lo, hi) = match (self.lo(), self.hi()) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => return Ok(CMatrix::zeros(self.rows, self.cols)),
        };
        if lo < 0 && z == ZERO {
            return Err(Error::Domain("z = 0 with negative powers present".into()));
        }
        let mut pos = CMatrix::zeros(self.rows, self.cols);
        for n in (0..=hi.max(-1)).rev() {
            pos *= z;
            if let Some(c) = self.coeff(n) {
                pos += c;
            }
        }
        if lo < 0 {
            let w = z.inv();
            let mut neg = CMatrix::zeros(self.rows, self.cols);
            for n in lo..=-1 {
                if let Some(c) = self.coeff(n) {
                    neg += c;
                }
                neg *= w;
            }
            pos += neg;
        }
        Ok(pos)
    }

    /// Samples at `exp(2 pi i j / count)`, `j = 0..count`.
    pub fn eval_unit_grid(&self, count: usize) -> Vec<CMatrix> {
        assert!(count >= 1, "grid needs at least one point");
        let mut out = vec![CMatrix::zeros(self.rows, self.cols); count];
        if self.is_zero() {
            return out;
        }
        let fft = FftPlanner::new().plan_fft_inverse(count);
        let mut buf = vec![ZERO; count];
        for i in 0..self.rows {
            for j in 0..self.cols {
                buf.iter_mut().for_each(|b| *b = ZERO);
                for (n, c) in self.terms() {
                    buf[n.rem_euclid(count as i32) as usize] += c[(i, j)];
                }
                fft.process(&mut buf);
                for (s, b) in out.iter_mut().zip(&buf) {
                    s[(i, j)] = *b;
                }
            }
        }
        out
    }

    /// Inverse of [`LaurentMatrix::eval_unit_grid`]: recovers the matrix
    /// whose powers lie in `lo..lo + samples.len()` from its samples on the
    /// uniform unit-circle grid.
    pub fn from_unit_grid(samples: &[CMatrix], lo: i32) -> Self {
        let count = samples.len();
        assert!(count >= 1, "grid needs at least one point");
        let (rows, cols) = samples[0].shape();
        let fft = FftPlanner::new().plan_fft_forward(count);
        let mut coeffs = vec![CMatrix::zeros(rows, cols); count];
        let mut buf = vec![ZERO; count];
        let norm = 1.0 / count as f64;
        for i in 0..rows {
            for j in 0..cols {
                for (b, s) in buf.iter_mut().zip(samples) {
                    *b = s[(i, j)];
                }
                fft.process(&mut buf);
                for (k, c) in coeffs.iter_mut().enumerate() {
                    let n = lo + k as i32;
                    c[(i, j)] = buf[n.rem_euclid(count as i32) as usize] * norm;
                }
            }
        }
        let mut m = Self::zeros(rows, cols);
        for (k, c) in coeffs.into_iter().enumerate() {
            m.insert(lo + k as i32, c);
        }
        m
    }

    /// Drops edge coefficient matrices whose largest entry is at most `tol`
    /// times the largest coefficient magnitude overall.
    pub fn trim(&self, tol: f64) -> Self {
        let thresh = tol * self.max_abs_coeff();
        let mut m = self.clone();
        while let Some((&n, c)) = m.terms.iter().next() {
            if max_abs(c) > thresh {
                break;
            }
            m.terms.remove(&n);
        }
        while let Some((&n, c)) = m.terms.iter().next_back() {
            if max_abs(c) > thresh {
                break;
            }
            m.terms.remove(&n);
        }
        m
    }

    /// Checks `C_{-n} = C_n^H` for every `n`, relative to the largest
    /// coefficient.
    pub fn is_parahermitian(&self, tol: f64) -> Result<bool> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "para-Hermitian test needs a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        let scale = self.max_abs_coeff().max(f64::MIN_POSITIVE);
        Ok(self.max_abs_diff(&self.adjoint()) <= tol * scale)
    }

    /// Submatrix formed by the given row and column indices.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut m = Self::zeros(rows.len(), cols.len());
        for (n, c) in self.terms() {
            m.insert(n, CMatrix::from_fn(rows.len(), cols.len(), |i, j| c[(rows[i], cols[j])]));
        }
        m
    }

    pub fn column(&self, j: usize) -> Self {
        self.select(&(0..self.rows).collect::<Vec<_>>(), &[j])
    }

    /// Stacks `self` on top of `below`.
    pub fn vstack(&self, below: &LaurentMatrix) -> Result<Self> {
        if self.cols != below.cols {
            return Err(Error::DimensionMismatch(format!(
                "cannot stack {} columns over {}",
                self.cols, below.cols
            )));
        }
        let rows = self.rows + below.rows;
        let mut m = Self::zeros(rows, self.cols);
        let mut powers: Vec<i32> = self.terms.keys().chain(below.terms.keys()).copied().collect();
        powers.sort_unstable();
        powers.dedup();
        for n in powers {
            let mut c = CMatrix::zeros(rows, self.cols);
            c.view_mut((0, 0), (self.rows, self.cols)).copy_from(&self.coeff_or_zero(n));
            c.view_mut((self.rows, 0), (below.rows, self.cols)).copy_from(&below.coeff_or_zero(n));
            m.insert(n, c);
        }
        Ok(m)
    }

    /// Places `right` beside `self`.
    pub fn hstack(&self, right: &LaurentMatrix) -> Result<Self> {
        Ok(self.transpose().vstack(&right.transpose())?.transpose())
    }
}

/// A Laurent matrix without negative powers: a matrix polynomial in `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticPolyMatrix(LaurentMatrix);

impl AnalyticPolyMatrix {
    pub fn new(m: LaurentMatrix) -> Result<Self> {
        if !m.is_analytic() {
            return Err(Error::InvalidInput(format!(
                "analytic matrix polynomial expected, found power {}",
                m.lo().unwrap_or(0)
            )));
        }
        Ok(Self(m))
    }

    /// `sum_n coeffs[n] z^n`.
    pub fn from_coeffs(rows: usize, cols: usize, coeffs: Vec<CMatrix>) -> Result<Self> {
        Self::new(LaurentMatrix::from_terms(
            rows,
            cols,
            coeffs.into_iter().enumerate().map(|(n, c)| (n as i32, c)),
        )?)
    }

    pub fn as_laurent(&self) -> &LaurentMatrix {
        &self.0
    }

    pub fn into_laurent(self) -> LaurentMatrix {
        self.0
    }

    /// Dense coefficients `A_0..=A_order`.
    pub fn coeffs(&self) -> Vec<CMatrix> {
        match self.0.hi() {
            Some(hi) => (0..=hi).map(|n| self.0.coeff_or_zero(n)).collect(),
            None => Vec::new(),
        }
    }

    pub fn mul_const(&self, rhs: &CMatrix) -> Result<Self> {
        Ok(Self(self.0.mul_const(rhs)?))
    }

    pub fn trim(&self, tol: f64) -> Self {
        Self(self.0.trim(tol))
    }
}

impl Deref for AnalyticPolyMatrix {
    type Target = LaurentMatrix;
    fn deref(&self) -> &LaurentMatrix {
        &self.0
    }
}

impl TryFrom<LaurentMatrix> for AnalyticPolyMatrix {
    type Error = Error;
    fn try_from(m: LaurentMatrix) -> Result<Self> {
        Self::new(m)
    }
}

impl From<AnalyticPolyMatrix> for LaurentMatrix {
    fn from(m: AnalyticPolyMatrix) -> Self {
        m.0
    }
}

/// Free-function form of [`LaurentMatrix::adjoint`].
pub fn adjoint(f: &LaurentMatrix) -> LaurentMatrix {
    f.adjoint()
}

/// Free-function form of [`LaurentMatrix::mul`].
pub fn mul(f: &LaurentMatrix, g: &LaurentMatrix) -> Result<LaurentMatrix> {
    f.mul(g)
}

/// Coefficientwise residual `max |S - F F*|`.
pub fn factor_residual(s: &LaurentMatrix, f: &LaurentMatrix) -> Result<f64> {
    Ok(s.max_abs_diff(&f.mul(&f.adjoint())?))
}

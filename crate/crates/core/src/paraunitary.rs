//! Completion of a unit-norm polynomial row to a paraunitary matrix and
//! paraunitarity checks.
//!
//! For a row `U1(z)` with `U1 U1* = 1` the matrix `S = I - U1^T (U1^T)*`
//! is nonnegative of rank `m - 1` on the unit circle. Its spectral factor
//! `S+` (`m x (m-1)`) gives the completion `U = [U1; (S+)^T]`, whose
//! determinant is `c z^N` with `N` the order of the row.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{determinant, unitarity_defect};
use crate::polylaurent::{AnalyticPolyMatrix, CMatrix, LaurentMatrix, LaurentPoly};
use crate::rankdef::{compare_factors, spectral_factor, RankDefOptions};

/// A row of analytic polynomials of order at most `order`.
#[derive(Clone, Debug, PartialEq)]
pub struct LosslessRow {
    entries: Vec<LaurentPoly>,
    order: usize,
}

impl LosslessRow {
    /// Builds a row whose order is the largest power present.
    pub fn new(entries: Vec<LaurentPoly>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("empty row".into()));
        }
        if let Some(j) = entries.iter().position(|p| !p.is_analytic()) {
            return Err(Error::InvalidInput(format!("entry {j} has negative powers")));
        }
        if entries.iter().all(LaurentPoly::is_zero) {
            return Err(Error::InvalidInput("zero row".into()));
        }
        let order = entries.iter().filter_map(LaurentPoly::hi).max().unwrap_or(0).max(0) as usize;
        Ok(Self { entries, order })
    }

    /// Builds a row with a declared order, which must match the largest
    /// power actually present.
    pub fn with_order(entries: Vec<LaurentPoly>, order: usize) -> Result<Self> {
        let row = Self::new(entries)?;
        if row.order != order {
            return Err(Error::InvalidInput(format!(
                "declared order {order} but the top nonzero power is {}",
                row.order
            )));
        }
        Ok(row)
    }

    /// Takes the first row of a `1 x m` analytic matrix.
    pub fn from_matrix(m: &LaurentMatrix) -> Result<Self> {
        if m.rows() != 1 {
            return Err(Error::DimensionMismatch(format!("expected one row, got {}", m.rows())));
        }
        Self::new((0..m.cols()).map(|j| m.entry(0, j)).collect())
    }

    pub fn entries(&self) -> &[LaurentPoly] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// The row as a `1 x m` matrix.
    pub fn to_matrix(&self) -> AnalyticPolyMatrix {
        let m = LaurentMatrix::from_fn(1, self.len(), |_, j| self.entries[j].clone());
        AnalyticPolyMatrix::new(m).expect("entries are analytic")
    }
}

/// Outcome of [`verify_paraunitary`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParaunitaryReport {
    pub is_paraunitary: bool,
    /// Largest coefficient of `U U* - I`.
    pub deviation: f64,
    /// Largest deviation from unitarity over the unit-circle samples.
    pub sample_deviation: f64,
    /// Power `k` of the dominant determinant coefficient.
    pub degree: usize,
    /// Largest non-leading determinant coefficient relative to `|c|`.
    pub det_off_monomial: f64,
    /// Dominant determinant coefficient `c`.
    pub det_phase: Complex64,
    /// Largest power present in `U`.
    pub length: usize,
}

/// True when `sum_j u_j u_j* - 1` has all coefficients within `tol`.
pub fn check_unit_norm_row(row: &LosslessRow, tol: f64) -> bool {
    let u = row.to_matrix();
    match u.mul(&u.adjoint()) {
        Ok(norm) => norm.max_abs_diff(&LaurentMatrix::identity(1)) <= tol,
        Err(_) => false,
    }
}

/// `S = I - U1^T (U1^T)*`, nonnegative of rank `m - 1` on the circle.
pub fn deficiency_matrix(row: &LosslessRow, tol: f64) -> Result<LaurentMatrix> {
    if !check_unit_norm_row(row, tol) {
        return Err(Error::InvalidInput("row does not have unit norm on the circle".into()));
    }
    let v = row.to_matrix().transpose();
    let outer = v.mul(&v.adjoint())?;
    LaurentMatrix::identity(row.len()).sub(&outer)
}

fn det_coefficients(u: &LaurentMatrix) -> Vec<Complex64> {
    let m = u.rows() as i32;
    let lo = m * u.lo().unwrap_or(0).min(0);
    let hi = m * u.hi().unwrap_or(0).max(0);
    let count = ((hi - lo + 1) as usize).next_power_of_two() * 2;
    let samples: Vec<CMatrix> = u
        .eval_unit_grid(count)
        .iter()
        .map(|x| CMatrix::from_element(1, 1, determinant(x)))
        .collect();
    let det = LaurentMatrix::from_unit_grid(&samples, lo).entry(0, 0);
    (lo..=hi).map(|n| det.coeff(n)).collect()
}

/// Checks `U U* = I` coefficientwise and on 64 unit-circle samples, and
/// that `det U` is a monomial `c z^k`.
pub fn verify_paraunitary(u: &LaurentMatrix, tol: f64) -> Result<ParaunitaryReport> {
    if !u.is_square() {
        return Err(Error::DimensionMismatch(format!("{}x{} is not square", u.rows(), u.cols())));
    }
    let m = u.rows();
    let deviation = u.mul(&u.adjoint())?.max_abs_diff(&LaurentMatrix::identity(m));
    let sample_deviation = u
        .eval_unit_grid(64)
        .iter()
        .map(unitarity_defect)
        .fold(0.0, f64::max);
    let lo = m as i32 * u.lo().unwrap_or(0).min(0);
    let det = det_coefficients(u);
    let (lead, c) = det
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .unwrap_or((0, Complex64::new(0.0, 0.0)));
    let off = det
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != lead)
        .map(|(_, x)| x.norm())
        .fold(0.0, f64::max)
        / c.norm().max(f64::MIN_POSITIVE);
    let power = lo + lead as i32;
    let is_paraunitary = deviation <= tol && sample_deviation <= tol && off <= tol && power >= 0;
    Ok(ParaunitaryReport {
        is_paraunitary,
        deviation,
        sample_deviation,
        degree: power.max(0) as usize,
        det_off_monomial: off,
        det_phase: c,
        length: u.hi().unwrap_or(0).max(0) as usize,
    })
}

/// The power `k` of `det U = c z^k`, which is at least the length of `U`.
pub fn paraunitary_degree(u: &LaurentMatrix, tol: f64) -> Result<usize> {
    let report = verify_paraunitary(u, tol)?;
    if !report.is_paraunitary {
        return Err(Error::NotParaunitary(format!(
            "deviation {:.3e}, non-monomial determinant mass {:.3e}",
            report.deviation.max(report.sample_deviation),
            report.det_off_monomial
        )));
    }
    if report.degree < report.length {
        return Err(Error::Internal(format!(
            "determinant degree {} below length {}",
            report.degree, report.length
        )));
    }
    Ok(report.degree)
}

/// Completes a unit-norm row to an `m x m` paraunitary matrix whose first
/// row is the input and whose determinant is `c z^N`.
pub fn complete_to_paraunitary(
    row: &LosslessRow,
    opts: &RankDefOptions,
) -> Result<(AnalyticPolyMatrix, ParaunitaryReport)> {
    let m = row.len();
    let first = row.to_matrix();
    let u = if m == 1 {
        if !check_unit_norm_row(row, opts.tol) {
            return Err(Error::InvalidInput("row does not have unit norm on the circle".into()));
        }
        first
    } else {
        let s = deficiency_matrix(row, opts.tol)?;
        let fopts = RankDefOptions {
            forced_rank: Some(m - 1),
            ..opts.clone()
        };
        let (splus, _) = spectral_factor(&s, &fopts)?;
        let lower = splus.transpose();
        AnalyticPolyMatrix::new(first.vstack(&lower)?)?
    };
    let report = verify_paraunitary(&u, opts.tol)?;
    if report.degree != row.order() {
        return Err(Error::Internal(format!(
            "determinant degree {} differs from the row order {}",
            report.degree,
            row.order()
        )));
    }
    Ok((u, report))
}

/// Finds the constant unitary `V` with `U2 = diag(1, V) U1`, if any.
pub fn compare_completions(u1: &LaurentMatrix, u2: &LaurentMatrix, tol: f64) -> Result<Option<CMatrix>> {
    if u1.shape() != u2.shape() || !u1.is_square() || u1.rows() == 0 {
        return Err(Error::DimensionMismatch("completions must be square of equal size".into()));
    }
    let m = u1.rows();
    let cols: Vec<usize> = (0..m).collect();
    let first_gap = u1.select(&[0], &cols).max_abs_diff(&u2.select(&[0], &cols));
    if first_gap > tol {
        return Err(Error::InvalidComparison(format!("first rows differ by {first_gap:.3e}")));
    }
    if m == 1 {
        return Ok(Some(CMatrix::zeros(0, 0)));
    }
    let rest: Vec<usize> = (1..m).collect();
    let l1 = AnalyticPolyMatrix::new(u1.select(&rest, &cols).transpose())?;
    let l2 = AnalyticPolyMatrix::new(u2.select(&rest, &cols).transpose())?;
    Ok(compare_factors(&l1, &l2, tol)?.map(|w| w.transpose()))
}


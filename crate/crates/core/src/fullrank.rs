//! Spectral factorization of positive-definite para-Hermitian matrix
//! polynomials.
//!
//! The matrix case uses Bauer's method: the block Cholesky factor of the
//! banded block-Toeplitz matrix built from the coefficients is computed row
//! by row, and its last block row converges to the coefficients of the
//! outer factor. A few Newton steps on the quadratic factor equation are
//! used as a final polish when the Toeplitz recursion converges slowly.
//! The scalar case is solved exactly from the roots of `z^n f(z)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, ordered_basis, svd, unitarity_defect};
use crate::polylaurent::{factor_residual, max_abs, AnalyticPolyMatrix, CMatrix, LaurentMatrix, LaurentPoly};
use crate::roots::{poly_from_roots, poly_roots};

/// Knobs for [`factor_positive_definite`].
#[derive(Clone, Debug, PartialEq)]
pub struct FactorOptions {
    /// Residual target relative to the largest coefficient of the input.
    pub tol: f64,
    /// Initial number of block rows of the Toeplitz system.
    pub bauer_block_count: usize,
    /// Number of times the block count may be doubled.
    pub max_refine_iters: usize,
    /// Unit-circle samples used for screening and verification.
    pub grid_count: usize,
    /// Maximum number of Newton polishing steps after the Toeplitz solve.
    pub polish_iters: usize,
}

impl FactorOptions {
    /// Defaults sized for an input of the given order.
    pub fn for_order(order: usize) -> Self {
        Self {
            tol: 1e-9,
            bauer_block_count: (2 * order + 2).max(64),
            max_refine_iters: 6,
            grid_count: (2 * order + 1).max(64),
            polish_iters: 8,
        }
    }

    fn validate(&self, order: usize) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidInput("tol must be positive".into()));
        }
        if self.bauer_block_count < 2 * order + 2 {
            return Err(Error::InvalidInput(format!(
                "bauer_block_count {} below 2*order+2 = {}",
                self.bauer_block_count,
                2 * order + 2
            )));
        }
        if self.grid_count < 2 * order + 1 {
            return Err(Error::InvalidInput(format!(
                "grid_count {} below 2*order+1 = {}",
                self.grid_count,
                2 * order + 1
            )));
        }
        Ok(())
    }
}

/// A factor normalized by a constant right unitary.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalForm {
    pub factor: AnalyticPolyMatrix,
    pub applied_unitary: CMatrix,
}

/// Scalar Fejér-Riesz factorization: returns the outer `q` with
/// `q(z) q*(z) = f(z)` and `q(0) > 0`.
pub fn scalar_factor(f: &LaurentPoly, tol: f64) -> Result<LaurentPoly> {
    let scale = f.max_abs();
    if scale == 0.0 {
        return Err(Error::NotFactorable("zero polynomial".into()));
    }
    let asym = (&f.adjoint() - f).max_abs();
    if asym > tol * scale {
        return Err(Error::NotFactorable(format!("not para-Hermitian (deviation {asym:e})")));
    }
    let n = f.hi().unwrap().max(-f.lo().unwrap()).max(0);
    let grid = 16 * (n as usize + 1) + 64;
    let samples = LaurentMatrix::from_fn(1, 1, |_, _| f.clone()).eval_unit_grid(grid);
    let min = samples.iter().map(|s| s[(0, 0)].re).fold(f64::INFINITY, f64::min);
    if min < -tol * scale {
        return Err(Error::NotFactorable(format!("negative on the unit circle (min {min:e})")));
    }
    if n == 0 {
        return Ok(LaurentPoly::constant(Complex64::new(f.coeff(0).re.max(0.0).sqrt(), 0.0)));
    }
    // r(z) = z^n f(z) has 2n roots in pairs {a, 1/conj(a)}.
    let r: Vec<Complex64> = (-n..=n).map(|p| f.coeff(p)).collect();
    let roots = poly_roots(&r);
    let outer = select_outer_roots(&roots, n as usize)?;
    let monic = poly_from_roots(&outer);
    // q = c * monic; the top coefficient of q q* is c * conj(q(0)).
    let prod_abs: f64 = outer.iter().map(|a| a.norm()).product();
    let c_abs = (f.coeff(n).norm() / prod_abs).sqrt();
    let q0 = monic[0];
    let phase = if q0.norm() > 0.0 { q0.conj() / q0.norm() } else { Complex64::new(1.0, 0.0) };
    let q = LaurentPoly::from_coeffs(0, &monic).scale(phase * c_abs);
    let res = (f - &(&q * &q.adjoint())).max_abs();
    if res > tol * scale {
        return Err(Error::numerical("scalar factor residual above tolerance", res / scale));
    }
    Ok(q)
}

/// Chooses the `n` roots of an outer factor from the `2n` roots of
/// `z^n f(z)`: every root outside the disk and half of each unit-circle
/// pair.
fn select_outer_roots(roots: &[Complex64], n: usize) -> Result<Vec<Complex64>> {
    const CIRCLE_BAND: f64 = 1e-7;
    let (mut circle, off): (Vec<Complex64>, Vec<Complex64>) =
        roots.iter().partition(|a| (a.norm() - 1.0).abs() < CIRCLE_BAND);
    if circle.len() % 2 == 1 {
        return Err(Error::NotFactorable(
            "odd-multiplicity zero on the unit circle".into(),
        ));
    }
    circle.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    let mut chosen = Vec::with_capacity(n);
    let mut used = vec![false; circle.len()];
    for i in 0..circle.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let partner = (0..circle.len())
            .filter(|&j| !used[j])
            .min_by(|&a, &b| (circle[a] - circle[i]).norm().total_cmp(&(circle[b] - circle[i]).norm()))
            .expect("even count");
        used[partner] = true;
        let mid = (circle[i] + circle[partner]) * 0.5;
        chosen.push(mid / mid.norm());
    }
    let mut off = off;
    off.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    chosen.extend(off.into_iter().take(n - chosen.len()));
    Ok(chosen)
}

/// Factors a positive-definite para-Hermitian `S` as `S+ (S+)*` with `S+`
/// outer, of the same order as `S`, and canonicalized.
pub fn factor_positive_definite(s: &LaurentMatrix, opts: &FactorOptions) -> Result<AnalyticPolyMatrix> {
    let (factor, residual) = factor_positive_definite_raw(s, opts)?;
    let scale = s.max_abs_coeff();
    if residual > opts.tol * scale {
        return Err(Error::numerical(
            "Toeplitz recursion did not reach the residual target",
            residual / scale,
        ));
    }
    Ok(canonicalize(&factor)?.factor)
}

/// Factorization without the final tolerance check or canonicalization.
/// Returns the factor and its absolute coefficientwise residual.
pub(crate) fn factor_positive_definite_raw(
    s: &LaurentMatrix,
    opts: &FactorOptions,
) -> Result<(AnalyticPolyMatrix, f64)> {
    if !s.is_square() {
        return Err(Error::DimensionMismatch(format!("{}x{} is not square", s.rows(), s.cols())));
    }
    let k = s.rows();
    let scale = s.max_abs_coeff();
    if scale == 0.0 {
        return Err(Error::NotFactorable("zero matrix".into()));
    }
    if !s.is_parahermitian(opts.tol)? {
        return Err(Error::NotFactorable("input is not para-Hermitian".into()));
    }
    let order = s.hi().unwrap().max(0) as usize;
    opts.validate(order)?;
    let screen = opts.grid_count.max(2 * order + 1);
    for sample in s.eval_unit_grid(screen) {
        let min = hermitian_eigenvalues(&sample)[0];
        if min < -opts.tol * scale {
            return Err(Error::NotFactorable(format!(
                "indefinite on the unit circle (eigenvalue {min:e})"
            )));
        }
    }

    let mut factor = LaurentMatrix::zeros(k, k);
    for block in decoupled_blocks(s) {
        let sub = s.select(&block, &block);
        let f = if block.len() == 1 {
            let q = scalar_factor(&sub.entry(0, 0), opts.tol)?;
            LaurentMatrix::from_fn(1, 1, |_, _| q.clone())
        } else {
            bauer_with_polish(&sub, order, opts)?.into_laurent()
        };
        for (bi, &i) in block.iter().enumerate() {
            for (bj, &j) in block.iter().enumerate() {
                factor.set_entry(i, j, &f.entry(bi, bj));
            }
        }
    }
    let factor = AnalyticPolyMatrix::new(factor)?;
    let residual = factor_residual(s, &factor)?;
    Ok((factor, residual))
}

/// Index sets of the diagonal blocks that the sparsity pattern of `s`
/// decouples.
fn decoupled_blocks(s: &LaurentMatrix) -> Vec<Vec<usize>> {
    let k = s.rows();
    let mut label: Vec<usize> = (0..k).collect();
    for (_, c) in s.terms() {
        for i in 0..k {
            for j in 0..k {
                if i != j && c[(i, j)].norm() > 0.0 {
                    let (a, b) = (label[i], label[j]);
                    if a != b {
                        let (lo, hi) = (a.min(b), a.max(b));
                        label.iter_mut().filter(|l| **l == hi).for_each(|l| *l = lo);
                    }
                }
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in 0..k {
        match blocks.iter_mut().find(|b| label[b[0]] == label[i]) {
            Some(b) => b.push(i),
            None => blocks.push(vec![i]),
        }
    }
    blocks
}

fn bauer_with_polish(s: &LaurentMatrix, order: usize, opts: &FactorOptions) -> Result<AnalyticPolyMatrix> {
    let scale = s.max_abs_coeff();
    let target = (opts.tol * 1e-4).max(1e-15) * scale;
    let mut best = bauer(s, order, opts.bauer_block_count, opts.max_refine_iters, target)?;
    let mut best_res = factor_residual(s, &best)?;
    for _ in 0..opts.polish_iters {
        if best_res <= target {
            break;
        }
        let Some(next) = newton_step(s, &best) else { break };
        let res = factor_residual(s, &next)?;
        if res < 0.5 * best_res {
            best = next;
            best_res = res;
        } else {
            break;
        }
    }
    Ok(best)
}

/// Streaming block Cholesky of the banded block-Toeplitz matrix with block
/// `(i, j) = C_{i-j}`. Only the last `order + 1` block rows are kept. The
/// residual of the candidate factor read from the current row is checked
/// each time the row count reaches `initial_blocks * 2^j`.
pub(crate) fn bauer(
    s: &LaurentMatrix,
    order: usize,
    initial_blocks: usize,
    doublings: usize,
    target: f64,
) -> Result<AnalyticPolyMatrix> {
    let k = s.rows();
    let c: Vec<CMatrix> = (0..=order as i32)
        .map(|n| {
            let cn = s.coeff_or_zero(n);
            if n == 0 {
                (&cn + cn.adjoint()) * Complex64::new(0.5, 0.0)
            } else {
                cn
            }
        })
        .collect();
    let zero = CMatrix::zeros(k, k);
    // rows[r][d] holds R_{i, i-d} for the row stored in slot r.
    let window = order + 1;
    let mut rows: Vec<Vec<CMatrix>> = vec![vec![zero.clone(); window]; window];
    let max_rows = initial_blocks << doublings;
    let mut checkpoint = initial_blocks;
    let mut best: Option<(AnalyticPolyMatrix, f64)> = None;
    let mut last_change = f64::INFINITY;

    for i in 0..max_rows {
        let slot = i % window;
        let mut row = vec![zero.clone(); window];
        // Off-diagonal blocks, left to right: j = i - d for d = order..1.
        for d in (1..=order.min(i)).rev() {
            let j = i - d;
            let jslot = j % window;
            let mut x = c[d].clone();
            // l ranges over columns shared by rows i and j, below j.
            for e in 1..=(order - d) {
                if e > j {
                    break;
                }
                // R_{i, j-e} = row[d+e], R_{j, j-e} = rows[jslot][e]
                x -= &row[d + e] * rows[jslot][e].adjoint();
            }
            let rjj = &rows[jslot][0];
            // R_{i,j} R_{j,j}^H = x  =>  R_{j,j} R_{i,j}^H = x^H
            let sol = rjj
                .solve_lower_triangular(&x.adjoint())
                .ok_or_else(|| Error::numerical("singular Cholesky pivot", f64::NAN))?;
            row[d] = sol.adjoint();
        }
        let mut x = c[0].clone();
        for r in row.iter().take(order.min(i) + 1).skip(1) {
            x -= r * r.adjoint();
        }
        let x = (&x + x.adjoint()) * Complex64::new(0.5, 0.0);
        let chol = x.cholesky().ok_or_else(|| {
            Error::NotFactorable("block Toeplitz matrix is not positive definite".into())
        })?;
        row[0] = chol.l();
        if i >= order {
            let prev = &rows[(i + window - 1) % window];
            if i > order {
                last_change = row
                    .iter()
                    .zip(prev)
                    .map(|(a, b)| max_abs(&(a - b)))
                    .fold(0.0, f64::max);
            }
        }
        rows[slot] = row;

        let count = i + 1;
        let converged = last_change <= f64::EPSILON * scale_of(&c);
        if count > order && (count == checkpoint || converged || count == max_rows) {
            let coeffs: Vec<CMatrix> = rows[slot].clone();
            let f = AnalyticPolyMatrix::from_coeffs(k, k, coeffs)?;
            let res = factor_residual(s, &f)?;
            let better = best.as_ref().is_none_or(|(_, r)| res < *r);
            if better {
                best = Some((f, res));
            }
            if res <= target || converged {
                break;
            }
            if count == checkpoint {
                checkpoint *= 2;
            }
        }
    }
    Ok(best.expect("at least one checkpoint").0)
}

fn scale_of(c: &[CMatrix]) -> f64 {
    c.iter().map(max_abs).fold(0.0, f64::max)
}

/// One Newton step for `X X* = S`: solves `X D* + D X* = S - X X*` for the
/// correction `D` of the same order in the least-squares (minimum-norm)
/// sense and returns `X + D`.
fn newton_step(s: &LaurentMatrix, x: &AnalyticPolyMatrix) -> Option<AnalyticPolyMatrix> {
    let k = x.rows();
    let order = x.hi()? as usize;
    let xc = x.coeffs();
    let resid = s.sub(&x.mul(&x.adjoint()).ok()?).ok()?;
    let blocks = order + 1;
    let per = k * k;
    let unknowns = 2 * per * blocks;

    let apply = |d: &[CMatrix]| -> Vec<CMatrix> {
        (0..blocks)
            .map(|n| {
                let mut out = CMatrix::zeros(k, k);
                for p in 0..blocks - n {
                    out += &xc[p + n] * d[p].adjoint() + &d[p + n] * xc[p].adjoint();
                }
                out
            })
            .collect()
    };
    let flatten = |m: &[CMatrix]| -> DVector<f64> {
        let mut v = DVector::zeros(unknowns);
        for (b, blk) in m.iter().enumerate() {
            for (e, z) in blk.iter().enumerate() {
                v[2 * (b * per + e)] = z.re;
                v[2 * (b * per + e) + 1] = z.im;
            }
        }
        v
    };

    let mut jac = DMatrix::<f64>::zeros(unknowns, unknowns);
    let mut basis = vec![CMatrix::zeros(k, k); blocks];
    for col in 0..unknowns {
        let (b, e, imag) = (col / (2 * per), (col / 2) % per, col % 2 == 1);
        let unit = if imag { Complex64::new(0.0, 1.0) } else { Complex64::new(1.0, 0.0) };
        basis[b][e] = unit;
        jac.set_column(col, &flatten(&apply(&basis)));
        basis[b][e] = Complex64::new(0.0, 0.0);
    }
    let rhs = flatten(&(0..blocks as i32).map(|n| resid.coeff_or_zero(n)).collect::<Vec<_>>());
    let dec = jac.svd(true, true);
    let smax = dec.singular_values.max();
    let sol = dec.solve(&rhs, smax * 1e-12).ok()?;
    let mut next = xc.clone();
    for (b, blk) in next.iter_mut().enumerate() {
        for e in 0..per {
            blk[e] += Complex64::new(sol[2 * (b * per + e)], sol[2 * (b * per + e) + 1]);
        }
    }
    AnalyticPolyMatrix::from_coeffs(k, k, next).ok()
}

/// Fixes the right-unitary freedom of a factor with full column rank at 0.
///
/// With `F(0) = W S V^H`, the applied unitary is `V D` where `D` holds the
/// phases that make the first largest-magnitude entry of each column of
/// `F(0) V` real and positive. Right singular vectors of (numerically)
/// repeated singular values are re-chosen from the projector onto their
/// span in input column order, which keeps the representative stable but
/// is not canonical in that case.
pub fn canonicalize(f: &AnalyticPolyMatrix) -> Result<CanonicalForm> {
    let k = f.cols();
    let f0 = f.coeff_or_zero(0);
    let dec = svd(&f0);
    let top = dec.sigma.first().copied().unwrap_or(0.0);
    if dec.sigma.len() < k || dec.sigma[k - 1] <= 1e-12 * top.max(f64::MIN_POSITIVE) || top == 0.0 {
        return Err(Error::Precondition("factor is rank deficient at z = 0".into()));
    }
    let mut v = CMatrix::zeros(k, k);
    let mut start = 0;
    while start < k {
        let mut end = start + 1;
        while end < k && dec.sigma[end - 1] - dec.sigma[end] <= 1e-9 * top {
            end += 1;
        }
        let span = dec.v.columns(start, end - start).into_owned();
        let basis = if end - start == 1 {
            span
        } else {
            let proj = &span * span.adjoint();
            let b = ordered_basis(&proj, end - start);
            if b.ncols() == end - start { b } else { span }
        };
        v.columns_mut(start, end - start).copy_from(&basis);
        start = end;
    }
    let x = &f0 * &v;
    let mut d = CMatrix::identity(k, k);
    for j in 0..k {
        let col = x.column(j);
        let peak = col.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        let lead = col
            .iter()
            .find(|z| z.norm() >= peak * (1.0 - 1e-9))
            .copied()
            .unwrap_or(Complex64::new(1.0, 0.0));
        d[(j, j)] = lead.conj() / lead.norm();
    }
    let applied = v * d;
    debug_assert!(unitarity_defect(&applied) < 1e-10);
    Ok(CanonicalForm {
        factor: f.mul_const(&applied)?,
        applied_unitary: applied,
    })
}

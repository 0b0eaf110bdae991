//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::polylaurent::CMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Thin singular value decomposition with singular values sorted in
/// decreasing order: `m = u * diag(sigma) * v^H`.
pub(crate) struct Svd {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    pub v: CMatrix,
}

pub(crate) fn svd(m: &CMatrix) -> Svd {
    let (rows, cols) = m.shape();
    let r = rows.min(cols);
    if r == 0 {
        return Svd {
            u: CMatrix::zeros(rows, 0),
            sigma: Vec::new(),
            v: CMatrix::zeros(cols, 0),
        };
    }
    let dec = SVD::new(m.clone(), true, true);
    let u = dec.u.expect("requested u");
    let v = dec.v_t.expect("requested v_t").adjoint();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| dec.singular_values[b].total_cmp(&dec.singular_values[a]));
    Svd {
        u: CMatrix::from_fn(rows, r, |i, j| u[(i, order[j])]),
        sigma: order.iter().map(|&j| dec.singular_values[j]).collect(),
        v: CMatrix::from_fn(cols, r, |i, j| v[(i, order[j])]),
    }
}

pub(crate) fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows().min(m.ncols()) == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Smallest singular value of a tall or square matrix together with the
/// corresponding right singular vector.
pub(crate) fn smallest_right_singular(m: &CMatrix) -> (f64, Vec<Complex64>) {
    let cols = m.ncols();
    // The Gram matrix squares the conditioning, so go through the full SVD.
    let mut padded = m.clone();
    if m.nrows() < cols {
        padded = padded.resize_vertically(cols, ZERO);
    }
    let dec = svd(&padded);
    let j = cols - 1;
    (dec.sigma[j], dec.v.column(j).iter().copied().collect())
}

/// Eigenvalues of a Hermitian matrix in increasing order.
pub(crate) fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut ev: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub(crate) fn determinant(m: &CMatrix) -> Complex64 {
    if m.nrows() == 0 {
        return ONE;
    }
    m.clone().lu().determinant()
}

/// Classical adjugate `adj(m)` with `m * adj(m) = det(m) I`, computed from
/// cofactors so it stays accurate when `m` is singular.
pub(crate) fn adjugate(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    if n == 1 {
        return CMatrix::from_element(1, 1, ONE);
    }
    CMatrix::from_fn(n, n, |i, j| {
        let minor = m.clone().remove_row(j).remove_column(i);
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        determinant(&minor) * sign
    })
}

/// Unitary matrix whose first column is the unit vector `v`, built from a
/// Householder reflection.
pub(crate) fn unitary_with_first_column(v: &[Complex64]) -> CMatrix {
    let n = v.len();
    let alpha = if v[0].norm() > 0.0 { v[0] / v[0].norm() } else { ONE };
    let mut w: Vec<Complex64> = v.to_vec();
    w[0] -= alpha;
    let wn: f64 = w.iter().map(|x| x.norm_sqr()).sum();
    let mut phase = CMatrix::identity(n, n);
    phase[(0, 0)] = alpha;
    if wn < 1e-30 {
        return phase;
    }
    let w = CMatrix::from_column_slice(n, 1, &w);
    let h = CMatrix::identity(n, n) - (&w * w.adjoint()) * Complex64::new(2.0 / wn, 0.0);
    h * phase
}

/// Largest deviation of `m^H m` from the identity.
pub(crate) fn unitarity_defect(m: &CMatrix) -> f64 {
    let g = m.adjoint() * m - CMatrix::identity(m.ncols(), m.ncols());
    g.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Orthonormal basis of the column space of `a` selected greedily in input
/// column order (modified Gram-Schmidt with a relative drop threshold).
pub(crate) fn ordered_basis(a: &CMatrix, want: usize) -> CMatrix {
    let n = a.nrows();
    let mut basis: Vec<DVector<Complex64>> = Vec::with_capacity(want);
    for j in 0..a.ncols() {
        if basis.len() == want {
            break;
        }
        let mut x = a.column(j).into_owned();
        let start = x.norm();
        for b in &basis {
            let proj = b.dotc(&x);
            x -= b * proj;
        }
        let nx = x.norm();
        if start > 0.0 && nx > 0.5 * start {
            basis.push(x / Complex64::new(nx, 0.0));
        }
    }
    let mut out = CMatrix::zeros(n, basis.len());
    for (j, b) in basis.iter().enumerate() {
        out.set_column(j, b);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn householder_first_column() {
        let v = [c(0.6, 0.0), c(0.0, 0.8)];
        let u = unitary_with_first_column(&v);
        assert!(unitarity_defect(&u) < 1e-14);
        assert!((u[(0, 0)] - v[0]).norm() < 1e-14 && (u[(1, 0)] - v[1]).norm() < 1e-14);
        let e = [c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0)];
        let u = unitary_with_first_column(&e);
        assert!(unitarity_defect(&u) < 1e-14);
        assert!((u[(0, 0)] - e[0]).norm() < 1e-14);
    }

    #[test]
    fn adjugate_identity() {
        let m = CMatrix::from_row_slice(3, 3, &[
            c(1.0, 1.0), c(2.0, 0.0), c(0.0, 0.5),
            c(-1.0, 0.0), c(0.3, 0.2), c(1.0, 0.0),
            c(0.0, 2.0), c(1.0, -1.0), c(0.5, 0.0),
        ]);
        let prod = &m * adjugate(&m);
        let d = determinant(&m);
        assert!((prod - CMatrix::identity(3, 3) * d).iter().all(|z| z.norm() < 1e-13));
    }

    #[test]
    fn svd_sorted() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(3.0, 0.0)]);
        let d = svd(&m);
        assert!((d.sigma[0] - 3.0).abs() < 1e-14 && (d.sigma[1] - 1.0).abs() < 1e-14);
        let back = &d.u * CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(2, d.sigma.iter().map(|&s| c(s, 0.0)))) * d.v.adjoint();
        assert!((back - m).iter().all(|z| z.norm() < 1e-14));
    }
}

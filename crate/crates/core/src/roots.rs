//! Dense univariate polynomial helpers: evaluation, roots via companion
//! matrix eigenvalues, root clustering and division by linear factors.
//!
//! Coefficient slices are in ascending order of power.

use nalgebra::Schur;
use num_complex::Complex64;

use crate::polylaurent::CMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn poly_eval(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(ZERO, |acc, c| acc * z + c)
}

fn poly_eval_with_derivative(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = ZERO;
    let mut dp = ZERO;
    for c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// `sum_i |c_i| |z|^i`, the natural magnitude scale of `p(z)`.
pub fn poly_abs_scale(coeffs: &[Complex64], z: Complex64) -> f64 {
    let r = z.norm();
    coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
}

/// Monic polynomial with the given roots.
pub fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut p = vec![ONE];
    for &r in roots {
        p = mul_linear(&p, -r, ONE);
    }
    p
}

/// `p(z) * (c0 + c1 z)`.
pub fn mul_linear(p: &[Complex64], c0: Complex64, c1: Complex64) -> Vec<Complex64> {
    let mut out = vec![ZERO; p.len() + 1];
    for (i, &c) in p.iter().enumerate() {
        out[i] += c * c0;
        out[i + 1] += c * c1;
    }
    out
}

/// Divides `p` by `(z - a)`. Returns the quotient and the absolute size of
/// the discarded remainder. The recurrence runs from the top for `|a| <= 1`
/// and from the bottom otherwise, which keeps it forward-stable in both
/// cases.
pub fn divide_linear(p: &[Complex64], a: Complex64) -> (Vec<Complex64>, f64) {
    let n = p.len();
    if n <= 1 {
        return (Vec::new(), p.first().map_or(0.0, |c| c.norm()));
    }
    let mut q = vec![ZERO; n - 1];
    if a.norm() <= 1.0 {
        q[n - 2] = p[n - 1];
        for i in (0..n - 2).rev() {
            q[i] = p[i + 1] + a * q[i + 1];
        }
        let rem = p[0] + a * q[0];
        (q, rem.norm())
    } else {
        q[0] = -p[0] / a;
        for i in 1..n - 1 {
            q[i] = (q[i - 1] - p[i]) / a;
        }
        let rem = p[n - 1] - q[n - 2];
        (q, rem.norm())
    }
}

/// Strips exactly-zero leading coefficients.
fn strip(coeffs: &[Complex64]) -> &[Complex64] {
    let mut end = coeffs.len();
    while end > 0 && coeffs[end - 1] == ZERO {
        end -= 1;
    }
    &coeffs[..end]
}

/// Parlett-Reinsch balancing by powers of two.
fn balance(m: &mut CMatrix) {
    let n = m.nrows();
    let radix = 2.0f64;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].norm();
                    r += m[(i, j)].norm();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut cc = c;
            let g = r / radix;
            while cc < g {
                f *= radix;
                cc *= radix * radix;
            }
            let g = r * radix;
            while cc > g {
                f /= radix;
                cc /= radix * radix;
            }
            if (c * f + r / f) < 0.95 * s {
                done = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

/// All complex roots of `sum_i coeffs[i] z^i`, counted with multiplicity.
///
/// The variable is first rescaled so the extreme coefficients have equal
/// magnitude, the companion matrix is balanced, its eigenvalues are taken
/// from a complex Schur decomposition, and each root is polished by Newton
/// steps on the original coefficients.
pub fn poly_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let p = strip(coeffs);
    if p.len() <= 1 {
        return Vec::new();
    }
    let zeros_at_origin = p.iter().take_while(|c| **c == ZERO).count();
    let q = &p[zeros_at_origin..];
    let n = q.len() - 1;
    let mut roots = vec![ZERO; zeros_at_origin];
    if n == 0 {
        return roots;
    }
    let s = (q[0].norm() / q[n].norm()).powf(1.0 / n as f64);
    // Monic in w with z = s w: coefficients b_i = q_i s^i / (q_n s^n).
    let lead = q[n];
    let b: Vec<Complex64> = (0..n)
        .map(|i| q[i] / lead * s.powi(i as i32 - n as i32))
        .collect();
    let mut found: Vec<Complex64> = if n == 1 {
        vec![-b[0] * s]
    } else {
        let mut comp = CMatrix::zeros(n, n);
        for j in 0..n {
            comp[(0, j)] = -b[n - 1 - j];
        }
        for i in 1..n {
            comp[(i, i - 1)] = ONE;
        }
        balance(&mut comp);
        let eig = Schur::try_new(comp.clone(), f64::EPSILON, 10_000)
            .map(|schur| schur.unpack().1.diagonal().iter().copied().collect::<Vec<_>>())
            .unwrap_or_else(|| aberth(&b));
        eig.into_iter().map(|w| w * s).collect()
    };
    for r in found.iter_mut() {
        *r = polish(q, *r);
    }
    roots.append(&mut found);
    roots
}

fn polish(p: &[Complex64], mut r: Complex64) -> Complex64 {
    let mut val = poly_eval(p, r).norm();
    for _ in 0..8 {
        let (f, df) = poly_eval_with_derivative(p, r);
        if df == ZERO || f == ZERO {
            break;
        }
        let next = r - f / df;
        let nv = poly_eval(p, next).norm();
        if nv < val {
            r = next;
            val = nv;
        } else {
            break;
        }
    }
    r
}

/// Simultaneous Aberth-Ehrlich iteration, used only if the Schur iteration
/// does not converge.
fn aberth(monic_low: &[Complex64]) -> Vec<Complex64> {
    let n = monic_low.len();
    let mut p = monic_low.to_vec();
    p.push(ONE);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let (f, df) = poly_eval_with_derivative(&p, z[i]);
            if f == ZERO {
                continue;
            }
            let ratio = f / df;
            let sum: Complex64 = (0..n).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
            let w = ratio / (ONE - ratio * sum);
            z[i] -= w;
            moved = moved.max(w.norm());
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

/// A cluster of nearly coincident roots.
#[derive(Clone, Debug, PartialEq)]
pub struct RootCluster {
    pub center: Complex64,
    pub multiplicity: usize,
}

/// Groups roots that lie within `radius * max(1, |r|)` of a cluster member
/// (single linkage).
pub fn cluster_roots(roots: &[Complex64], radius: f64) -> Vec<RootCluster> {
    let n = roots.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        label[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            let scale = roots[i].norm().max(roots[j].norm()).max(1.0);
            if (roots[i] - roots[j]).norm() <= radius * scale {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                label[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<(usize, Vec<Complex64>)> = Vec::new();
    for (i, &root) in roots.iter().enumerate() {
        let r = find(&mut label, i);
        match groups.iter_mut().find(|(l, _)| *l == r) {
            Some((_, g)) => g.push(root),
            None => groups.push((r, vec![root])),
        }
    }
    groups
        .into_iter()
        .map(|(_, g)| RootCluster {
            center: g.iter().sum::<Complex64>() / g.len() as f64,
            multiplicity: g.len(),
        })
        .collect()
}

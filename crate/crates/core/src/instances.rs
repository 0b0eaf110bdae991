//! Seeded random problem instances with known answers.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[cfg(test)]
use crate::linalg::unitarity_defect;
use crate::polylaurent::{max_abs, AnalyticPolyMatrix, CMatrix, LaurentMatrix};
use crate::paraunitary::LosslessRow;
use crate::rankdef::{find_rank_drop_points, fix_rank_drop, RankDefOptions};

/// A spectrum `S = A A*` built from a known factor `A` (`m x k`).
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub secret_factor: AnalyticPolyMatrix,
    pub spectrum: LaurentMatrix,
    pub seed: u64,
    pub m: usize,
    pub k: usize,
    pub order: usize,
}

impl Instance {
    /// Wraps a given factor.
    pub fn from_factor(a: AnalyticPolyMatrix, seed: u64) -> Self {
        let spectrum = a.mul(&a.adjoint()).expect("A A* is always defined");
        Self {
            m: a.rows(),
            k: a.cols(),
            order: a.hi().unwrap_or(0).max(0) as usize,
            secret_factor: a,
            spectrum,
            seed,
        }
    }
}

/// A paraunitary `U_true` of known degree together with its first row.
#[derive(Clone, Debug, PartialEq)]
pub struct LosslessInstance {
    pub secret_paraunitary: AnalyticPolyMatrix,
    /// First row of `U_true`.
    pub row: LosslessRow,
    pub seed: u64,
    pub m: usize,
    pub degree: usize,
}

fn gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
}

/// Options for [`gen_spectrum`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SpectrumOptions {
    /// Remove the rank drops of `A` inside the disk so `A` is itself the
    /// outer factor of `S`.
    pub interior_zero_free: bool,
}

/// Random `m x m` spectrum of rank `k` and order `N`.
///
/// The factor has i.i.d. complex Gaussian coefficients scaled so the
/// largest has magnitude one.
pub fn gen_spectrum(m: usize, k: usize, order: usize, seed: u64, options: SpectrumOptions) -> Instance {
    assert!(1 <= k && k <= m, "rank {k} outside 1..={m}");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<CMatrix> = (0..=order)
        .map(|_| CMatrix::from_fn(m, k, |_, _| gaussian(&mut rng)))
        .collect();
    let top = coeffs.iter().map(max_abs).fold(0.0, f64::max);
    let coeffs: Vec<CMatrix> = coeffs.into_iter().map(|c| c / Complex64::new(top, 0.0)).collect();
    let mut a = AnalyticPolyMatrix::from_coeffs(m, k, coeffs).expect("finite coefficients");
    if options.interior_zero_free {
        let opts = RankDefOptions {
            rng_seed: seed,
            ..RankDefOptions::for_problem(m, order)
        };
        for _ in 0..opts.max_zero_fix_iters {
            let points = find_rank_drop_points(&a, &opts).unwrap_or_default();
            let Some(&p) = points.first() else { break };
            match fix_rank_drop(&a, p, &opts) {
                Ok((next, _)) => a = next,
                Err(_) => break,
            }
        }
    }
    Instance::from_factor(a, seed)
}

fn random_unit_vector(rng: &mut ChaCha8Rng, m: usize) -> CMatrix {
    let v = CMatrix::from_fn(m, 1, |_, _| gaussian(rng));
    let n = v.norm();
    v / Complex64::new(n, 0.0)
}

fn random_unitary(rng: &mut ChaCha8Rng, m: usize) -> CMatrix {
    let g = CMatrix::from_fn(m, m, |_, _| gaussian(rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    // Fix the column phases so the distribution is Haar.
    let phases = CMatrix::from_fn(m, m, |i, j| {
        if i == j && r[(i, i)].norm() > 0.0 {
            r[(i, i)] / r[(i, i)].norm()
        } else if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    q * phases
}

/// `Q0 * V(v_1) * ... * V(v_N)` where `Q0` is a random unitary and
/// `V(v) = I - v v^H + z v v^H` for given unit vectors.
pub fn elementary_product(q0: &CMatrix, vs: &[CMatrix]) -> AnalyticPolyMatrix {
    let m = q0.nrows();
    let mut u = LaurentMatrix::constant(q0.clone());
    for v in vs {
        let proj = v * v.adjoint();
        let factor = LaurentMatrix::from_terms(m, m, [(0, CMatrix::identity(m, m) - &proj), (1, proj)])
            .expect("finite");
        u = u.mul(&factor).expect("square");
    }
    AnalyticPolyMatrix::new(u).expect("analytic")
}

/// Random paraunitary matrix of degree `N` built from elementary factors.
///
/// Draws whose first row has order below `N` are repeated up to 16 times;
/// after that the last draw is kept with its actual row order.
pub fn gen_lossless(m: usize, order: usize, seed: u64) -> LosslessInstance {
    assert!(m >= 1, "m must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = None;
    for _ in 0..16 {
        let q0 = random_unitary(&mut rng, m);
        let vs: Vec<CMatrix> = (0..order).map(|_| random_unit_vector(&mut rng, m)).collect();
        let u = elementary_product(&q0, &vs);
        let row = first_row(&u);
        let full = row.order() == order;
        last = Some((u, row));
        if full {
            break;
        }
    }
    let (u, row) = last.expect("at least one draw");
    LosslessInstance {
        secret_paraunitary: u,
        row,
        seed,
        m,
        degree: order,
    }
}

fn first_row(u: &AnalyticPolyMatrix) -> LosslessRow {
    let cols: Vec<usize> = (0..u.cols()).collect();
    LosslessRow::from_matrix(&u.select(&[0], &cols).trim(1e-14)).expect("rows of a unitary are nonzero")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polylaurent::factor_residual;

    #[test]
    fn constant_scalar_spectrum_is_positive() {
        for seed in 0..5 {
            let inst = gen_spectrum(1, 1, 0, seed, SpectrumOptions::default());
            let c = inst.spectrum.coeff(0).unwrap()[(0, 0)];
            assert!(c.re > 0.0 && c.im.abs() < 1e-15);
            assert_eq!(inst.spectrum.order(), Some(0));
        }
    }

    #[test]
    fn fixture_factor_gives_expected_spectrum() {
        let one = CMatrix::from_element(2, 1, Complex64::new(1.0, 0.0));
        let mut c1 = CMatrix::zeros(2, 1);
        c1[(0, 0)] = Complex64::new(1.0, 0.0);
        let a = AnalyticPolyMatrix::from_coeffs(2, 1, vec![one, c1]).unwrap();
        let inst = Instance::from_factor(a, 0);
        let s00 = inst.spectrum.entry(0, 0);
        assert_eq!(s00.coeff(-1), Complex64::new(1.0, 0.0));
        assert_eq!(s00.coeff(0), Complex64::new(2.0, 0.0));
        assert_eq!(s00.coeff(1), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn spectra_are_parahermitian_and_exact() {
        for seed in 0..10 {
            let inst = gen_spectrum(3, 2, 3, seed, SpectrumOptions::default());
            assert!(inst.spectrum.is_parahermitian(1e-14).unwrap());
            let res = factor_residual(&inst.spectrum, &inst.secret_factor).unwrap();
            assert!(res <= 1e-12 * inst.spectrum.max_abs_coeff());
            assert_eq!(inst.spectrum.order(), inst.secret_factor.order());
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let opts = SpectrumOptions { interior_zero_free: true };
        assert_eq!(gen_spectrum(4, 2, 5, 99, opts), gen_spectrum(4, 2, 5, 99, opts));
        assert_eq!(gen_lossless(3, 4, 5), gen_lossless(3, 4, 5));
    }

    #[test]
    fn interior_zero_free_factor_has_no_drops() {
        let opts = SpectrumOptions { interior_zero_free: true };
        for seed in 0..5 {
            let inst = gen_spectrum(3, 2, 4, seed, opts);
            let ro = RankDefOptions::for_problem(3, 4);
            assert!(find_rank_drop_points(&inst.secret_factor, &ro).unwrap().is_empty());
        }
    }

    #[test]
    fn single_elementary_factor() {
        let mut v = CMatrix::zeros(2, 1);
        v[(0, 0)] = Complex64::new(1.0, 0.0);
        let u = elementary_product(&CMatrix::identity(2, 2), &[v]);
        let z = Complex64::new(0.3, -0.4);
        let val = u.eval(z).unwrap();
        assert!((val[(0, 0)] - z).norm() < 1e-15);
        assert!((val[(1, 1)] - 1.0).norm() < 1e-15);
        assert!(val[(0, 1)].norm() + val[(1, 0)].norm() < 1e-15);
    }

    #[test]
    fn lossless_zero_degree_is_constant_unitary() {
        let inst = gen_lossless(3, 0, 4);
        assert_eq!(inst.secret_paraunitary.order(), Some(0));
        assert!(unitarity_defect(&inst.secret_paraunitary.coeff_or_zero(0)) < 1e-13);
    }
}

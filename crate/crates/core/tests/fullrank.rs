use num_complex::Complex64;
use polyfact::fullrank::{canonicalize, factor_positive_definite, scalar_factor, FactorOptions};
use polyfact::instances::{gen_spectrum, SpectrumOptions};
use polyfact::polylaurent::factor_residual;
use polyfact::rankdef::compare_factors;
use polyfact::{AnalyticPolyMatrix, CMatrix, LaurentMatrix, LaurentPoly};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_poly(rng: &mut ChaCha8Rng, order: usize) -> LaurentPoly {
    let coeffs: Vec<Complex64> = (0..=order)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    LaurentPoly::from_coeffs(0, &coeffs)
}

fn random_unitary(rng: &mut ChaCha8Rng, k: usize) -> CMatrix {
    let g = CMatrix::from_fn(k, k, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let svd = g.svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

fn diag(entries: &[LaurentPoly]) -> LaurentMatrix {
    let n = entries.len();
    LaurentMatrix::from_fn(n, n, |i, j| if i == j { entries[i].clone() } else { LaurentPoly::zero() })
}

#[test]
fn scalar_factor_of_two_plus_z_plus_inverse() {
    let f = LaurentPoly::from_real(-1, &[1.0, 2.0, 1.0]);
    let q = scalar_factor(&f, 1e-9).unwrap();
    assert_eq!(q.lo(), Some(0));
    assert_eq!(q.hi(), Some(1));
    assert!((q.coeff(0) - 1.0).norm() < 1e-7);
    assert!((q.coeff(1) - 1.0).norm() < 1e-7);
}

#[test]
fn scalar_factor_of_positive_constant() {
    let q = scalar_factor(&LaurentPoly::constant(c(4.0, 0.0)), 1e-12).unwrap();
    assert_eq!(q.hi(), Some(0));
    assert!((q.coeff(0) - 2.0).norm() < 1e-14);
}

#[test]
fn scalar_factor_matches_modulus_of_random_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for order in 0..=8 {
        let p = random_poly(&mut rng, order);
        let f = &p * &p.adjoint();
        let q = scalar_factor(&f, 1e-9).unwrap();
        assert!(q.coeff(0).re > 0.0 && q.coeff(0).im.abs() < 1e-12);
        for j in 0..256 {
            let z = Complex64::from_polar(1.0, std::f64::consts::TAU * j as f64 / 256.0);
            let gap = q.eval(z).unwrap().norm() - p.eval(z).unwrap().norm();
            assert!(gap.abs() < 1e-8, "order {order}, sample {j}: {gap:e}");
        }
        // No zeros inside the disk.
        let (_, dense) = q.dense();
        for r in polyfact::roots::poly_roots(&dense) {
            assert!(r.norm() >= 1.0 - 1e-7, "root {r} inside");
        }
    }
}

#[test]
fn scalar_factor_rejects_indefinite_input() {
    let f = LaurentPoly::from_real(-1, &[1.0, 0.5, 1.0]);
    assert!(matches!(scalar_factor(&f, 1e-9), Err(polyfact::Error::NotFactorable(_))));
}

#[test]
fn identity_factors_to_identity() {
    let f = factor_positive_definite(&LaurentMatrix::identity(3), &FactorOptions::for_order(0)).unwrap();
    assert!(f.max_abs_diff(&LaurentMatrix::identity(3)) < 1e-12);
}

#[test]
fn diagonal_input_matches_scalar_factors() {
    let s = diag(&[LaurentPoly::from_real(-1, &[1.0, 2.0, 1.0]), LaurentPoly::constant(c(1.0, 0.0))]);
    let f = factor_positive_definite(&s, &FactorOptions::for_order(1)).unwrap();
    let expected = diag(&[LaurentPoly::from_real(0, &[1.0, 1.0]), LaurentPoly::constant(c(1.0, 0.0))]);
    assert!(f.max_abs_diff(&expected) < 1e-7, "{:?}", f);
}

#[test]
fn diagonal_with_random_entries_matches_scalar_factors() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let entries: Vec<LaurentPoly> = (0..3)
        .map(|_| {
            let p = random_poly(&mut rng, 3);
            &p * &p.adjoint()
        })
        .collect();
    let f = factor_positive_definite(&diag(&entries), &FactorOptions::for_order(3)).unwrap();
    for (i, e) in entries.iter().enumerate() {
        let q = scalar_factor(e, 1e-9).unwrap();
        let fi = f.entry(i, i);
        // Same up to the canonical phase of the column.
        let phase = fi.coeff(0) / q.coeff(0);
        assert!((phase.norm() - 1.0).abs() < 1e-9);
        for n in 0..=3 {
            assert!((fi.coeff(n) - q.coeff(n) * phase).norm() < 1e-9);
        }
    }
}

#[test]
fn random_outer_factor_is_recovered_up_to_unitary() {
    let opts = SpectrumOptions { interior_zero_free: true };
    for seed in 0..6 {
        let inst = gen_spectrum(3, 3, 4, 200 + seed, opts);
        let s = &inst.spectrum;
        let f = factor_positive_definite(s, &FactorOptions::for_order(4)).unwrap();
        let res = factor_residual(s, &f).unwrap() / s.max_abs_coeff();
        assert!(res <= 1e-7, "seed {seed}: residual {res:e}");
        assert_eq!(f.order(), Some(4));
        let u = compare_factors(&f, &inst.secret_factor, 1e-6).unwrap();
        assert!(u.is_some(), "seed {seed}: factors differ by more than a constant unitary");
    }
}

#[test]
fn determinant_stays_away_from_zero_inside_disk() {
    let opts = SpectrumOptions { interior_zero_free: true };
    for seed in 0..4 {
        let inst = gen_spectrum(2, 2, 3, 300 + seed, opts);
        let f = factor_positive_definite(&inst.spectrum, &FactorOptions::for_order(3)).unwrap();
        let scale = f.max_abs_coeff();
        let mut points = vec![c(0.0, 0.0)];
        for r in [0.25, 0.5, 0.75, 0.9] {
            points.extend((0..64).map(|j| Complex64::from_polar(r, std::f64::consts::TAU * j as f64 / 64.0)));
        }
        for z in points {
            let det = f.eval(z).unwrap().determinant();
            assert!(det.norm() >= 1e-10 * scale.powi(2), "seed {seed}: det {det} at {z}");
        }
    }
}

#[test]
fn indefinite_matrix_is_rejected() {
    let s = diag(&[LaurentPoly::constant(c(1.0, 0.0)), LaurentPoly::constant(c(-1.0, 0.0))]);
    let err = factor_positive_definite(&s, &FactorOptions::for_order(0)).unwrap_err();
    assert!(matches!(err, polyfact::Error::NotFactorable(_)), "{err}");
}

#[test]
fn too_few_toeplitz_blocks_is_invalid() {
    let s = diag(&[LaurentPoly::from_real(-1, &[1.0, 2.0, 1.0]), LaurentPoly::constant(c(1.0, 0.0))]);
    let opts = FactorOptions {
        bauer_block_count: 2,
        ..FactorOptions::for_order(1)
    };
    assert!(matches!(factor_positive_definite(&s, &opts), Err(polyfact::Error::InvalidInput(_))));
}

#[test]
fn canonicalize_leaves_identity_at_origin_alone() {
    let f = AnalyticPolyMatrix::from_coeffs(
        2,
        2,
        vec![CMatrix::identity(2, 2), CMatrix::from_fn(2, 2, |i, j| c((i + 2 * j) as f64, 0.5))],
    )
    .unwrap();
    let form = canonicalize(&f).unwrap();
    assert!((form.applied_unitary - CMatrix::identity(2, 2)).iter().all(|z| z.norm() < 1e-12));
    assert!(form.factor.max_abs_diff(&f) < 1e-12);
}

#[test]
fn canonicalize_keeps_positive_diagonal() {
    let mut d = CMatrix::zeros(2, 2);
    d[(0, 0)] = c(2.0, 0.0);
    d[(1, 1)] = c(1.0, 0.0);
    let f = AnalyticPolyMatrix::from_coeffs(2, 2, vec![d]).unwrap();
    let form = canonicalize(&f).unwrap();
    assert!(form.factor.max_abs_diff(&f) < 1e-12);
}

#[test]
fn canonicalize_removes_right_unitary() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for seed in 0..5 {
        let inst = gen_spectrum(3, 2, 2, 400 + seed, SpectrumOptions::default());
        let f = &inst.secret_factor;
        let u = random_unitary(&mut rng, 2);
        let a = canonicalize(f).unwrap();
        let b = canonicalize(&f.mul_const(&u).unwrap()).unwrap();
        assert!(a.factor.max_abs_diff(&b.factor) < 1e-9, "seed {seed}");
        let defect = (b.applied_unitary.adjoint() * &b.applied_unitary - CMatrix::identity(2, 2))
            .iter()
            .fold(0.0f64, |m, z| m.max(z.norm()));
        assert!(defect < 1e-12);
    }
}

#[test]
fn canonicalize_rejects_rank_deficient_origin() {
    let f = AnalyticPolyMatrix::from_coeffs(
        2,
        1,
        vec![CMatrix::zeros(2, 1), CMatrix::from_element(2, 1, c(1.0, 0.0))],
    )
    .unwrap();
    assert!(matches!(canonicalize(&f), Err(polyfact::Error::Precondition(_))));
}

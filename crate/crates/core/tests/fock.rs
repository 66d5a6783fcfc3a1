use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use weyl_lab::fock::FockContext;
use weyl_lab::hilbert::CVector;
use weyl_lab::states::{evaluate, StateFunctional};
use weyl_lab::weyl::WeylPolynomial;

fn sigma(x: &CVector, y: &CVector) -> f64 {
    x.coeffs().iter().map(|(k, a)| (a * y.coeff(*k).conj()).im).sum()
}

/// Columns of `m` for basis states whose occupations are all at most `cap`.
fn low_columns(ctx: &FockContext, m: &DMatrix<Complex64>, cap: usize) -> Vec<DVector<Complex64>> {
    (0..ctx.dim())
        .filter(|&i| ctx.occupations(i).iter().all(|&n| n <= cap))
        .map(|i| m.column(i).into_owned())
        .collect()
}

#[test]
fn ccr_holds_below_the_cutoff() {
    let ctx = FockContext::new(&[0, 1], 12).unwrap();
    for mode in [0, 1] {
        let a = ctx.annihilator(mode).unwrap();
        let ad = ctx.creator(mode).unwrap();
        let c = &a * &ad - &ad * &a;
        for i in 0..ctx.dim() {
            if ctx.occupations(i).iter().all(|&n| n + 2 <= 12) {
                for j in 0..ctx.dim() {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((c[(i, j)] - expected).norm() <= 1e-14);
                }
            }
        }
    }
}

#[test]
fn weyl_relation_in_the_fock_representation() {
    let ctx = FockContext::single_mode(40).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let draw = |rng: &mut ChaCha8Rng| {
        let z = Complex64::from_polar(rng.random_range(0.0..0.5), rng.random_range(0.0..std::f64::consts::TAU));
        CVector::from_pairs([(0, z)])
    };
    for _ in 0..20 {
        let (x, y) = (draw(&mut rng), draw(&mut rng));
        let lhs = ctx.weyl_matrix(&x).unwrap() * ctx.weyl_matrix(&y).unwrap();
        let rhs = ctx.weyl_matrix(&x.add(&y).unwrap()).unwrap() * Complex64::from_polar(1.0, sigma(&x, &y));
        let diff = lhs - rhs;
        let worst = low_columns(&ctx, &diff, 5).iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
    }
}

#[test]
fn two_mode_weyl_operators_factor() {
    let ctx = FockContext::new(&[0, 1], 20).unwrap();
    let x = CVector::from_pairs([(0, Complex64::new(0.3, 0.1)), (1, Complex64::new(-0.2, 0.25))]);
    let y = CVector::from_pairs([(0, Complex64::new(0.0, -0.4)), (1, Complex64::new(0.1, 0.0))]);
    let lhs = ctx.weyl_matrix(&x).unwrap() * ctx.weyl_matrix(&y).unwrap();
    let rhs = ctx.weyl_matrix(&x.add(&y).unwrap()).unwrap() * Complex64::from_polar(1.0, sigma(&x, &y));
    let worst = low_columns(&ctx, &(lhs - rhs), 4).iter().map(|c| c.norm()).fold(0.0, f64::max);
    assert!(worst < 1e-6);
    let omega = ctx.vacuum();
    let vev = omega.dotc(&(ctx.weyl_matrix(&x).unwrap() * &omega));
    assert!((vev - (-0.5 * x.norm_sqr()).exp()).norm() < 1e-10);
}

#[test]
fn thermal_state_reproduces_quasi_free_values() {
    let ctx = FockContext::single_mode(60).unwrap();
    for s2 in [1.0, 2.0, 5.0] {
        let rho = ctx.thermal_density(s2).unwrap();
        let qf = StateFunctional::quasi_free(s2).unwrap();
        for i in 0..=15 {
            let t = 0.1 * i as f64;
            let w = WeylPolynomial::generator(CVector::basis(0).scale(Complex64::new(t, 0.0)));
            let fock = ctx.state_expectation(&rho, &w).unwrap();
            assert!((fock - evaluate(&qf, &w).unwrap()).norm() <= 1e-5, "s2 = {s2}, t = {t}");
        }
    }
}

#[test]
fn thermal_density_matches_geometric_law() {
    let ctx = FockContext::single_mode(60).unwrap();
    for s2 in [1.0, 3.0, 5.0] {
        let rho = ctx.thermal_density(s2).unwrap();
        let q: f64 = (s2 - 1.0) / (s2 + 1.0);
        let z: f64 = (0..=60).map(|n| q.powi(n)).sum();
        for n in 0..=60 {
            assert!((rho[(n, n)].re - q.powi(n as i32) / z).abs() < 1e-15);
        }
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
    }
}

#[test]
fn quadrature_moments_are_gaussian() {
    let ctx = FockContext::single_mode(60).unwrap();
    let phi = ctx.field_matrix(&CVector::basis(0)).unwrap();
    let psi = ctx.field_matrix(&CVector::basis(0).scale(Complex64::i())).unwrap();
    for s2 in [1.0, 2.0, 5.0] {
        let rho = ctx.thermal_density(s2).unwrap();
        let ev = |op: &DMatrix<Complex64>| ctx.expectation(&rho, op).unwrap();
        let phi2 = &phi * &phi;
        assert!(ev(&phi).norm() < 1e-12);
        assert!((ev(&phi2).re - s2).abs() <= 1e-3);
        assert!((ev(&(&phi2 * &phi2)).re - 3.0 * s2 * s2).abs() <= 1e-3);
        let var_psi = ev(&(&psi * &psi)).re - ev(&psi).re.powi(2);
        let product = (ev(&phi2).re - ev(&phi).re.powi(2)) * var_psi;
        assert!((product - s2 * s2).abs() <= 1e-4 && product >= 1.0 - 1e-12);
    }
}

#[test]
fn field_commutator_is_twice_sigma() {
    let ctx = FockContext::single_mode(30).unwrap();
    let x = CVector::from_pairs([(0, Complex64::new(0.4, 0.3))]);
    let y = CVector::from_pairs([(0, Complex64::new(-0.1, 0.8))]);
    let (fx, fy) = (ctx.field_matrix(&x).unwrap(), ctx.field_matrix(&y).unwrap());
    let c = &fx * &fy - &fy * &fx;
    let expected = Complex64::new(0.0, -2.0 * sigma(&x, &y));
    for i in 0..20 {
        assert!((c[(i, i)] - expected).norm() < 1e-12);
    }
}

#[test]
fn exponential_vectors_have_exponential_overlaps() {
    let ctx = FockContext::new(&[0, 1], 30).unwrap();
    let x = CVector::from_pairs([(0, Complex64::new(0.5, -0.2)), (1, Complex64::new(0.1, 0.6))]);
    let y = CVector::from_pairs([(0, Complex64::new(-0.3, 0.4)), (1, Complex64::new(0.7, 0.0))]);
    let (ex, ey) = (ctx.exponential_vector(&x).unwrap(), ctx.exponential_vector(&y).unwrap());
    // ⟨x, y⟩ linear in the first slot
    let inner: Complex64 = x.coeffs().iter().map(|(k, a)| a * y.coeff(*k).conj()).sum();
    assert!((ey.dotc(&ex) - inner.exp()).norm() < 1e-8);
}

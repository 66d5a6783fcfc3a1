//! Truncated occupation-number realization of the Fock representation.
//!
//! The symmetric Fock space over the modes of a context is built directly in
//! the occupation basis `|n_1, …, n_m⟩`, `0 ≤ n_k ≤ N`, ordered
//! lexicographically with the first mode most significant.
//!
//! Field operators are `Φ(x) = Σ_k (conj(x_k) a_k + x_k a_k†)`, so that
//! `[Φ(x), Φ(y)] = −2iσ(x, y)` on the untruncated space and
//! `W(x) = e^{iΦ(x)}` satisfies the Weyl relation with vacuum expectation
//! `e^{−‖x‖²/2}`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::CVector;
use crate::weyl::WeylPolynomial;

pub const MAX_MODES: usize = 3;
pub const MAX_CUTOFF: usize = 80;
pub const MAX_DIM: usize = 3600;
pub const DEFAULT_CUTOFF: usize = 40;
/// Accuracy claims for Weyl matrices hold up to this vector norm.
pub const ACCURATE_NORM: f64 = 1.5;

#[derive(Clone, Debug)]
pub struct FockContext {
    modes: Vec<i64>,
    cutoff: usize,
    dim: usize,
    // spectral decomposition of the single-mode quadrature a + a†
    quad_values: DVector<f64>,
    quad_vectors: DMatrix<f64>,
}

impl FockContext {
    pub fn new(modes: &[i64], cutoff: usize) -> Result<Self> {
        if modes.is_empty() || modes.len() > MAX_MODES {
            return Err(Error::Domain(format!("need 1 to {MAX_MODES} modes, got {}", modes.len())));
        }
        let mut sorted = modes.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != modes.len() {
            return Err(Error::Domain("modes must be distinct".into()));
        }
        if cutoff == 0 || cutoff > MAX_CUTOFF {
            return Err(Error::Domain(format!("cutoff must be in [1, {MAX_CUTOFF}], got {cutoff}")));
        }
        let dim = (cutoff + 1).checked_pow(modes.len() as u32).unwrap_or(usize::MAX);
        if dim > MAX_DIM {
            return Err(Error::Domain(format!("dimension {dim} exceeds {MAX_DIM}")));
        }
        let levels = cutoff + 1;
        let quad = DMatrix::from_fn(levels, levels, |i, j| {
            if i + 1 == j {
                (j as f64).sqrt()
            } else if j + 1 == i {
                (i as f64).sqrt()
            } else {
                0.0
            }
        });
        let SymmetricEigen { eigenvalues, eigenvectors } = SymmetricEigen::new(quad);
        Ok(FockContext {
            modes: modes.to_vec(),
            cutoff,
            dim,
            quad_values: eigenvalues,
            quad_vectors: eigenvectors,
        })
    }

    pub fn single_mode(cutoff: usize) -> Result<Self> {
        Self::new(&[0], cutoff)
    }

    pub fn modes(&self) -> &[i64] {
        &self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn levels(&self) -> usize {
        self.cutoff + 1
    }

    fn stride(&self, pos: usize) -> usize {
        self.levels().pow((self.modes.len() - 1 - pos) as u32)
    }

    fn position(&self, mode: i64) -> Result<usize> {
        self.modes.iter().position(|&k| k == mode).ok_or(Error::UnsupportedMode(mode))
    }

    /// Occupation tuple of basis vector `index`.
    pub fn occupations(&self, index: usize) -> Vec<usize> {
        (0..self.modes.len()).map(|p| (index / self.stride(p)) % self.levels()).collect()
    }

    pub fn index_of(&self, occupations: &[usize]) -> usize {
        occupations.iter().enumerate().map(|(p, &n)| n * self.stride(p)).sum()
    }

    pub fn vacuum(&self) -> DVector<Complex64> {
        let mut v = DVector::zeros(self.dim);
        v[0] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn annihilator(&self, mode: i64) -> Result<DMatrix<Complex64>> {
        let p = self.position(mode)?;
        let stride = self.stride(p);
        let mut a = DMatrix::zeros(self.dim, self.dim);
        for idx in 0..self.dim {
            let n = (idx / stride) % self.levels();
            if n > 0 {
                a[(idx - stride, idx)] = Complex64::new((n as f64).sqrt(), 0.0);
            }
        }
        Ok(a)
    }

    pub fn creator(&self, mode: i64) -> Result<DMatrix<Complex64>> {
        Ok(self.annihilator(mode)?.adjoint())
    }

    pub fn number(&self, mode: i64) -> Result<DMatrix<Complex64>> {
        let p = self.position(mode)?;
        Ok(DMatrix::from_fn(self.dim, self.dim, |i, j| {
            if i == j {
                Complex64::new(self.occupations(i)[p] as f64, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    fn check_vector(&self, x: &CVector) -> Result<()> {
        if !x.is_localized() {
            return Err(Error::NonLocalized { excess: x.excess() });
        }
        for k in x.support() {
            self.position(k)?;
        }
        Ok(())
    }

    /// `Φ(x) = Σ_k (conj(x_k) a_k + x_k a_k†)`.
    pub fn field_matrix(&self, x: &CVector) -> Result<DMatrix<Complex64>> {
        self.check_vector(x)?;
        let mut phi = DMatrix::zeros(self.dim, self.dim);
        for (&k, &c) in x.coeffs() {
            let a = self.annihilator(k)?;
            phi += a.map(|z| z * c.conj()) + a.adjoint().map(|z| z * c);
        }
        Ok(phi)
    }

    /// `e^{iΦ_1(c)}` on one mode. With `c = r e^{iθ}` and `U_θ = diag(e^{inθ})`,
    /// `Φ_1(c) = U_θ r(a + a†) U_θ*`, so the exponential follows from the
    /// spectral decomposition of `a + a†`.
    fn single_mode_weyl(&self, c: Complex64) -> DMatrix<Complex64> {
        let levels = self.levels();
        if c == Complex64::new(0.0, 0.0) {
            return DMatrix::identity(levels, levels);
        }
        let (r, theta) = c.to_polar();
        let v = &self.quad_vectors;
        let phases: Vec<Complex64> = self.quad_values.iter().map(|&l| Complex64::from_polar(1.0, r * l)).collect();
        let mut m = DMatrix::zeros(levels, levels);
        for i in 0..levels {
            for j in 0..levels {
                let mut acc = Complex64::new(0.0, 0.0);
                for (l, ph) in phases.iter().enumerate() {
                    acc += ph * (v[(i, l)] * v[(j, l)]);
                }
                m[(i, j)] = acc * Complex64::from_polar(1.0, theta * (i as f64 - j as f64));
            }
        }
        m
    }

    /// `W(x) = e^{iΦ(x)}`, assembled as the tensor product of single-mode
    /// exponentials (the per-mode fields commute exactly in the truncation).
    pub fn weyl_matrix(&self, x: &CVector) -> Result<DMatrix<Complex64>> {
        self.check_vector(x)?;
        if x.norm() > ACCURATE_NORM {
            log::warn!(
                "Weyl matrix for ‖x‖ = {:.3} exceeds the accuracy range ‖x‖ ≤ {ACCURATE_NORM}",
                x.norm()
            );
        }
        let mut out = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        for &k in &self.modes {
            out = out.kronecker(&self.single_mode_weyl(x.coeff(k)));
        }
        Ok(out)
    }

    /// `e(x)` with coefficients `∏_k x_k^{n_k} / √(n_k!)`, so that
    /// `⟨e(x), e(y)⟩ = e^{⟨x,y⟩}` up to the truncation tail.
    pub fn exponential_vector(&self, x: &CVector) -> Result<DVector<Complex64>> {
        self.check_vector(x)?;
        let per_mode: Vec<Vec<Complex64>> = self
            .modes
            .iter()
            .map(|&k| {
                let c = x.coeff(k);
                let mut out = Vec::with_capacity(self.levels());
                let mut term = Complex64::new(1.0, 0.0);
                for n in 0..self.levels() {
                    if n > 0 {
                        term *= c / (n as f64).sqrt();
                    }
                    out.push(term);
                }
                out
            })
            .collect();
        Ok(DVector::from_fn(self.dim, |idx, _| {
            self.occupations(idx).iter().enumerate().map(|(p, &n)| per_mode[p][n]).product()
        }))
    }

    /// `Γ(diag(q))`: diagonal with entry `∏_k q_k^{n_k}`.
    pub fn gamma_diagonal(&self, q: &[Complex64]) -> Result<DMatrix<Complex64>> {
        if q.len() != self.modes.len() {
            return Err(Error::Domain(format!("need {} scalars, got {}", self.modes.len(), q.len())));
        }
        if let Some(z) = q.iter().find(|z| !(z.norm() <= 1.0)) {
            return Err(Error::Contraction { modulus: z.norm() });
        }
        let powers: Vec<Vec<Complex64>> = q
            .iter()
            .map(|&z| {
                let mut v = Vec::with_capacity(self.levels());
                let mut acc = Complex64::new(1.0, 0.0);
                for _ in 0..self.levels() {
                    v.push(acc);
                    acc *= z;
                }
                v
            })
            .collect();
        let mut g = DMatrix::zeros(self.dim, self.dim);
        for idx in 0..self.dim {
            g[(idx, idx)] =
                self.occupations(idx).iter().enumerate().map(|(p, &n)| powers[p][n]).product();
        }
        Ok(g)
    }

    /// `T_{s2} = Γ(q)/Tr Γ(q)` with `q = (s2 − 1)/(s2 + 1)` on every mode,
    /// i.e. `Γ(A(I+A)⁻¹)` for `A = (s2 − 1)/2 · I`.
    pub fn thermal_density(&self, s2: f64) -> Result<DMatrix<Complex64>> {
        if !(s2.is_finite() && s2 >= 1.0) {
            return Err(Error::Domain(format!("thermal density needs finite s2 >= 1, got {s2}")));
        }
        let q = Complex64::new((s2 - 1.0) / (s2 + 1.0), 0.0);
        let g = self.gamma_diagonal(&vec![q; self.modes.len()])?;
        let tr = g.trace();
        Ok(g.map(|z| z / tr))
    }

    /// `Σ_j c_j Tr(ρ W(x_j))`.
    pub fn state_expectation(&self, rho: &DMatrix<Complex64>, a: &WeylPolynomial) -> Result<Complex64> {
        self.check_square(rho)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for t in a.terms() {
            acc += t.coeff * trace_product(rho, &self.weyl_matrix(&t.vector)?);
        }
        Ok(acc)
    }

    /// `Tr(ρ X)`.
    pub fn expectation(&self, rho: &DMatrix<Complex64>, op: &DMatrix<Complex64>) -> Result<Complex64> {
        self.check_square(rho)?;
        self.check_square(op)?;
        Ok(trace_product(rho, op))
    }

    fn check_square(&self, m: &DMatrix<Complex64>) -> Result<()> {
        if m.shape() != (self.dim, self.dim) {
            return Err(Error::Domain(format!(
                "matrix is {}x{}, context dimension is {}",
                m.nrows(),
                m.ncols(),
                self.dim
            )));
        }
        Ok(())
    }
}

fn trace_product(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Export format for operators and state vectors: `dims` plus row-major
/// `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<[f64; 2]>,
}

impl Tensor {
    pub fn from_matrix(m: &DMatrix<Complex64>) -> Self {
        let data = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| [m[(i, j)].re, m[(i, j)].im])
            .collect();
        Tensor { dims: vec![m.nrows(), m.ncols()], data }
    }

    pub fn from_vector(v: &DVector<Complex64>) -> Self {
        Tensor { dims: vec![v.len()], data: v.iter().map(|z| [z.re, z.im]).collect() }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<Complex64>> {
        match self.dims.as_slice() {
            &[r, c] if r * c == self.data.len() => {
                Ok(DMatrix::from_fn(r, c, |i, j| {
                    let [re, im] = self.data[i * c + j];
                    Complex64::new(re, im)
                }))
            }
            _ => Err(Error::Domain(format!("tensor with dims {:?} is not a matrix", self.dims))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_abs(m: &DMatrix<Complex64>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn field_matrix_single_mode() {
        let ctx = FockContext::single_mode(2).unwrap();
        let phi = ctx.field_matrix(&CVector::basis(0)).unwrap();
        for n in 0..2 {
            assert!((phi[(n + 1, n)] - c(((n + 1) as f64).sqrt(), 0.0)).norm() < 1e-15);
            assert!((phi[(n, n + 1)] - c(((n + 1) as f64).sqrt(), 0.0)).norm() < 1e-15);
        }
        assert_eq!(phi[(0, 2)], c(0.0, 0.0));
        assert_eq!(max_abs(&ctx.field_matrix(&CVector::zero()).unwrap()), 0.0);
        assert!(max_abs(&(phi.adjoint() - &phi)) < 1e-14);
    }

    #[test]
    fn vacuum_second_moment_is_norm() {
        let ctx = FockContext::new(&[0, 1], 3).unwrap();
        let x = CVector::from_pairs([(0, c(0.3, -0.5)), (1, c(0.1, 0.6))]);
        let phi = ctx.field_matrix(&x).unwrap();
        let om = ctx.vacuum();
        let m2 = (om.adjoint() * &phi * &phi * &om)[(0, 0)];
        assert!((m2 - c(x.norm_sqr(), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn unsupported_inputs() {
        let ctx = FockContext::single_mode(4).unwrap();
        assert!(matches!(ctx.field_matrix(&CVector::basis(1)), Err(Error::UnsupportedMode(1))));
        assert!(matches!(
            ctx.weyl_matrix(&CVector::basis(0).with_excess(0.2)),
            Err(Error::NonLocalized { .. })
        ));
        assert!(FockContext::new(&[0, 1, 2, 3], 2).is_err());
        assert!(FockContext::new(&[0, 0], 2).is_err());
        assert!(FockContext::new(&[0, 1], 80).is_err());
        assert!(matches!(ctx.thermal_density(0.5), Err(Error::Domain(_))));
        assert!(matches!(ctx.gamma_diagonal(&[c(1.01, 0.0)]), Err(Error::Contraction { .. })));
    }

    #[test]
    fn weyl_of_zero_is_identity() {
        let ctx = FockContext::new(&[0, 1], 4).unwrap();
        let w = ctx.weyl_matrix(&CVector::zero()).unwrap();
        assert_eq!(w, DMatrix::identity(ctx.dim(), ctx.dim()));
    }

    #[test]
    fn weyl_vacuum_expectation() {
        let ctx = FockContext::single_mode(40).unwrap();
        for k in 0..=10 {
            let r = k as f64 / 10.0;
            let x = CVector::from_pairs([(0, Complex64::from_polar(r, 0.7 * k as f64))]);
            let w = ctx.weyl_matrix(&x).unwrap();
            assert!((w[(0, 0)] - c((-0.5 * r * r).exp(), 0.0)).norm() < 1e-6);
        }
    }

    #[test]
    fn tensor_route_matches_direct_exponential() {
        // independent route: spectral decomposition of the full Hermitian Φ(x)
        let ctx = FockContext::new(&[-1, 2], 6).unwrap();
        let x = CVector::from_pairs([(-1, c(0.4, 0.3)), (2, c(-0.2, 0.5))]);
        let phi = ctx.field_matrix(&x).unwrap();
        let eig = phi.symmetric_eigen();
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::from_polar(1.0, l)));
        let direct = &eig.eigenvectors * d * eig.eigenvectors.adjoint();
        let tensor = ctx.weyl_matrix(&x).unwrap();
        assert!(max_abs(&(direct - tensor)) < 1e-12);
    }

    #[test]
    fn weyl_is_unitary_on_low_occupations() {
        let ctx = FockContext::single_mode(40).unwrap();
        let w = ctx.weyl_matrix(&CVector::from_pairs([(0, c(0.9, -0.6))])).unwrap();
        let p = w.adjoint() * &w;
        for i in 0..=20 {
            for j in 0..=20 {
                let t = if i == j { 1.0 } else { 0.0 };
                assert!((p[(i, j)] - c(t, 0.0)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn ccr_away_from_the_cutoff() {
        let ctx = FockContext::new(&[0, 1], 5).unwrap();
        for mode in [0, 1] {
            let a = ctx.annihilator(mode).unwrap();
            let ad = ctx.creator(mode).unwrap();
            let comm = &a * &ad - &ad * &a;
            let p = ctx.modes().iter().position(|&k| k == mode).unwrap();
            for i in 0..ctx.dim() {
                if ctx.occupations(i)[p] < ctx.cutoff() {
                    for j in 0..ctx.dim() {
                        let t = if i == j { 1.0 } else { 0.0 };
                        assert!((comm[(i, j)] - c(t, 0.0)).norm() < 1e-14);
                    }
                }
            }
        }
        // the number operator is a† a
        let n = ctx.number(1).unwrap();
        let a = ctx.annihilator(1).unwrap();
        assert!(max_abs(&(a.adjoint() * &a - n)) < 1e-14);
    }

    #[test]
    fn exponential_vectors() {
        let ctx = FockContext::single_mode(30).unwrap();
        assert_eq!(ctx.exponential_vector(&CVector::zero()).unwrap(), ctx.vacuum());
        let x = CVector::from_pairs([(0, c(0.6, 0.7))]);
        let y = CVector::from_pairs([(0, c(-0.3, 0.2))]);
        let ex = ctx.exponential_vector(&x).unwrap();
        let ey = ctx.exponential_vector(&y).unwrap();
        // ⟨e(x), e(y)⟩ = Σ_n (x conj y)^n / n! = e^{⟨x,y⟩}
        let ip = ey.adjoint() * &ex;
        let expected = (x.coeff(0) * y.coeff(0).conj()).exp();
        assert!((ip[(0, 0)] - expected).norm() < 1e-8);
        let nn = ex.norm_squared();
        assert!((nn - x.norm_sqr().exp()).abs() < 1e-8);
    }

    #[test]
    fn gamma_examples() {
        let ctx = FockContext::single_mode(2).unwrap();
        assert_eq!(ctx.gamma_diagonal(&[c(1.0, 0.0)]).unwrap(), DMatrix::identity(3, 3));
        let g0 = ctx.gamma_diagonal(&[c(0.0, 0.0)]).unwrap();
        assert_eq!(g0, ctx.vacuum() * ctx.vacuum().adjoint());
        let g = ctx.gamma_diagonal(&[c(0.5, 0.0)]).unwrap();
        assert_eq!(g, DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(0.5, 0.0), c(0.25, 0.0)])));
    }

    #[test]
    fn gamma_is_multiplicative_and_maps_exponential_vectors() {
        let ctx = FockContext::new(&[0, 1], 8).unwrap();
        let q = [c(0.5, 0.2), c(-0.3, 0.0)];
        let r = [c(0.1, -0.9), c(0.7, 0.7)];
        let qr = [q[0] * r[0], q[1] * r[1]];
        let lhs = ctx.gamma_diagonal(&q).unwrap() * ctx.gamma_diagonal(&r).unwrap();
        assert!(max_abs(&(lhs - ctx.gamma_diagonal(&qr).unwrap())) < 1e-15);

        let x = CVector::from_pairs([(0, c(0.4, 0.1)), (1, c(-0.5, 0.3))]);
        let qx = CVector::from_pairs([(0, q[0] * x.coeff(0)), (1, q[1] * x.coeff(1))]);
        let lhs = ctx.gamma_diagonal(&q).unwrap() * ctx.exponential_vector(&x).unwrap();
        let rhs = ctx.exponential_vector(&qx).unwrap();
        assert!((lhs - rhs).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn thermal_examples() {
        let ctx = FockContext::single_mode(20).unwrap();
        let t1 = ctx.thermal_density(1.0).unwrap();
        assert_eq!(t1, ctx.vacuum() * ctx.vacuum().adjoint());
        let t3 = ctx.thermal_density(3.0).unwrap();
        // q = 0.5: (1 − q) q^n, renormalized on the truncation
        let norm: f64 = (0..=20).map(|n| 0.5f64.powi(n)).sum();
        for n in 0..=20 {
            assert!((t3[(n, n)].re - 0.5f64.powi(n as i32) / norm).abs() < 1e-15);
        }
        assert!((t3.trace() - c(1.0, 0.0)).norm() < 1e-12);
        assert!(((1.0 - 0.5) * 0.5 - t3[(1, 1)].re).abs() < 1e-6);
    }

    #[test]
    fn tensor_export() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 2.0), c(3.0, 0.0), c(4.0, -1.0)]);
        let t = Tensor::from_matrix(&m);
        assert_eq!(t.dims, vec![2, 2]);
        assert_eq!(t.data[1], [0.0, 2.0]);
        assert_eq!(t.to_matrix().unwrap(), m);
    }
}

//! Positivity of characteristic functionals on finite point sets.
//!
//! A functional `G` is a state iff every moment matrix
//! `M_{ij} = ω(W(z_i)* W(z_j)) = e^{−iσ(z_i, z_j)} G(z_j − z_i)` is positive
//! semidefinite.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::hilbert::{symplectic_form, CVector};
use crate::states::StateFunctional;

/// Minimum eigenvalue accepted as positive semidefinite.
pub const PSD_TOL: f64 = -1e-9;
/// Minimum eigenvalue below which a point set is reported as a violation.
pub const VIOLATION_TOL: f64 = -1e-6;
/// Largest asymmetry tolerated before the eigensolve.
pub const HERMITIAN_TOL: f64 = 1e-9;
pub const MAX_POINTS: usize = 64;

/// Point-set scales cycled through by [`search_violation`].
pub const SEARCH_SCALES: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

#[derive(Clone, Debug, PartialEq)]
pub struct MomentMatrix {
    pub points: Vec<CVector>,
    pub entries: DMatrix<Complex64>,
}

pub fn moment_matrix(s: &StateFunctional, points: &[CVector]) -> Result<MomentMatrix> {
    let n = points.len();
    if n > MAX_POINTS {
        return Err(Error::Domain(format!("at most {MAX_POINTS} points, got {n}")));
    }
    let mut entries = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for i in 0..n {
        for j in 0..n {
            entries[(i, j)] = if i == j {
                Complex64::new(s.characteristic(&CVector::zero())?, 0.0)
            } else {
                let phase = Complex64::from_polar(1.0, -symplectic_form(&points[i], &points[j])?);
                phase * s.characteristic(&points[j].sub(&points[i])?)?
            };
        }
    }
    Ok(MomentMatrix { points: points.to_vec(), entries })
}

pub fn min_eigenvalue(m: &MomentMatrix) -> Result<f64> {
    hermitian_min_eigenvalue(&m.entries)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn hermitian_min_eigenvalue(m: &DMatrix<Complex64>) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::Domain("matrix must be square".into()));
    }
    if m.is_empty() {
        return Err(Error::Domain("matrix must be nonempty".into()));
    }
    let asymmetry = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if asymmetry > HERMITIAN_TOL {
        return Err(Error::NotHermitian { asymmetry });
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigenvalues();
    Ok(eig.iter().copied().fold(f64::INFINITY, f64::min))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MvCheck {
    pub holds: bool,
    pub worst_margin: f64,
}

/// `α(z,z) α(w,w) − σ(z,w)²` with `α(z,z) = λ Re(z)² + μ Im(z)²`, minimized
/// over the pairs. All vectors must live on one common mode.
pub fn mv_inequality_check(lambda: f64, mu: f64, pairs: &[(CVector, CVector)]) -> Result<MvCheck> {
    let mut mode: Option<i64> = None;
    let mut scalar = |v: &CVector| -> Result<Complex64> {
        if !v.is_localized() {
            return Err(Error::NonLocalized { excess: v.excess() });
        }
        for k in v.support() {
            match mode {
                None => mode = Some(k),
                Some(m) if m == k => {}
                Some(_) => return Err(Error::Domain("vectors must share a single mode".into())),
            }
        }
        Ok(mode.map(|k| v.coeff(k)).unwrap_or_default())
    };
    let alpha = |z: Complex64| lambda * z.re * z.re + mu * z.im * z.im;
    let mut worst = f64::INFINITY;
    for (x, y) in pairs {
        let (z, w) = (scalar(x)?, scalar(y)?);
        let sigma = (z * w.conj()).im;
        worst = worst.min(alpha(z) * alpha(w) - sigma * sigma);
    }
    Ok(MvCheck { holds: worst >= -1e-12, worst_margin: worst })
}

/// A point set whose moment matrix has a negative eigenvalue.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub trial: usize,
    pub matrix: MomentMatrix,
    pub min_eig: f64,
}

/// The deterministic point set drawn for trial `trial` of a search.
///
/// Each trial has its own ChaCha stream, so the set depends only on
/// `(seed, trial)`. Trials cycle through [`SEARCH_SCALES`] and alternate
/// between one and two modes.
pub fn sample_points(n_points: usize, trial: usize, seed: u64) -> Vec<CVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let scale = SEARCH_SCALES[trial % SEARCH_SCALES.len()];
    let modes = 1 + (trial / SEARCH_SCALES.len()) % 2;
    (0..n_points)
        .map(|_| {
            CVector::from_pairs((0..modes as i64).map(|k| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                (k, Complex64::new(scale * re, scale * im))
            }))
        })
        .collect()
}

fn check_search_args(n_points: usize, trials: usize) -> Result<()> {
    if !(2..=8).contains(&n_points) {
        return Err(Error::Domain(format!("n_points must be in [2, 8], got {n_points}")));
    }
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    Ok(())
}

/// First trial (by index) whose moment matrix has an eigenvalue below
/// [`VIOLATION_TOL`]. Trials run in parallel; the result does not depend on
/// scheduling.
pub fn search_violation(
    s: &StateFunctional,
    n_points: usize,
    trials: usize,
    seed: u64,
) -> Result<Option<Witness>> {
    check_search_args(n_points, trials)?;
    let found = (0..trials).into_par_iter().find_map_first(|trial| {
        let run = || -> Result<Option<Witness>> {
            let matrix = moment_matrix(s, &sample_points(n_points, trial, seed))?;
            let min_eig = min_eigenvalue(&matrix)?;
            Ok((min_eig < VIOLATION_TOL).then_some(Witness { trial, matrix, min_eig }))
        };
        run().transpose()
    });
    found.transpose()
}

/// Smallest moment-matrix eigenvalue over the same trials [`search_violation`] visits.
pub fn scan_min_eigenvalue(s: &StateFunctional, n_points: usize, trials: usize, seed: u64) -> Result<f64> {
    check_search_args(n_points, trials)?;
    let eigs: Result<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|trial| min_eigenvalue(&moment_matrix(s, &sample_points(n_points, trial, seed))?))
        .collect();
    Ok(eigs?.into_iter().fold(f64::INFINITY, f64::min))
}

fn complex_rows(m: &DMatrix<Complex64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

impl Serialize for MomentMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("MomentMatrix", 2)?;
        st.serialize_field("entries", &complex_rows(&self.entries))?;
        st.serialize_field("points", &self.points)?;
        st.end()
    }
}

impl Serialize for Witness {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Witness", 4)?;
        st.serialize_field("entries", &complex_rows(&self.matrix.entries))?;
        st.serialize_field("min_eig", &self.min_eig)?;
        st.serialize_field("points", &self.matrix.points)?;
        st.serialize_field("trial", &self.trial)?;
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn qf(s2: f64) -> StateFunctional {
        StateFunctional::quasi_free(s2).unwrap()
    }

    #[test]
    fn complex_hermitian_eigenvalues() {
        // [[1, i], [-i, 1]] has eigenvalues 0 and 2
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(1.0, 0.0)]);
        assert!(hermitian_min_eigenvalue(&m).unwrap().abs() < 1e-14);
        let m = DMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(1.0, 1.0), c(1.0, -1.0), c(3.0, 0.0)]);
        // trace 5, det 4 → (5 − √9)/2 = 1
        assert!((hermitian_min_eigenvalue(&m).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn min_eigenvalue_examples() {
        let id = DMatrix::<Complex64>::identity(3, 3);
        assert!((hermitian_min_eigenvalue(&id).unwrap() - 1.0).abs() < 1e-15);
        let ones = DMatrix::from_element(2, 2, c(1.0, 0.0));
        assert!(hermitian_min_eigenvalue(&ones).unwrap().abs() < 1e-15);
        let skew = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(hermitian_min_eigenvalue(&skew), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn vacuum_two_point_matrix() {
        let pts = vec![CVector::zero(), CVector::from_pairs([(0, c(0.6, 0.8))])];
        let m = moment_matrix(&StateFunctional::Vacuum, &pts).unwrap();
        let g = (-0.5f64).exp();
        assert!((m.entries[(0, 1)] - c(g, 0.0)).norm() < 1e-15);
        assert!((m.entries[(1, 0)] - c(g, 0.0)).norm() < 1e-15);
        assert_eq!(m.entries[(0, 0)], c(1.0, 0.0));
        assert!((min_eigenvalue(&m).unwrap() - (1.0 - g)).abs() < 1e-14);
        assert!((1.0 - g - 0.3935).abs() < 1e-4);
    }

    #[test]
    fn trace_gives_identity() {
        let pts: Vec<CVector> = (1..5).map(|k| CVector::basis(0).scale(c(k as f64, 0.3))).collect();
        let m = moment_matrix(&StateFunctional::trace(), &pts).unwrap();
        assert_eq!(m.entries, DMatrix::identity(4, 4));
    }

    #[test]
    fn anisotropic_violation_has_witness() {
        let pg = StateFunctional::product_gaussian(0.5, 0.5).unwrap();
        let w = search_violation(&pg, 3, 1000, 11).unwrap().expect("witness");
        assert!(w.min_eig < -1e-4, "min eig {}", w.min_eig);
        assert_eq!(w.matrix.points.len(), 3);
    }

    #[test]
    fn mv_examples() {
        let one = CVector::basis(0);
        let i = CVector::from_pairs([(0, c(0.0, 1.0))]);
        let r = mv_inequality_check(1.0, 1.0, &[(one.clone(), i.clone())]).unwrap();
        assert!(r.holds && r.worst_margin.abs() < 1e-15);
        let r = mv_inequality_check(2.0, 0.5, &[(one.clone(), i.clone())]).unwrap();
        assert!(r.holds && r.worst_margin.abs() < 1e-15);
        let r = mv_inequality_check(0.5, 0.5, &[(one.clone(), i.clone())]).unwrap();
        assert!(!r.holds && (r.worst_margin + 0.75).abs() < 1e-15);
        assert!(mv_inequality_check(1.0, 1.0, &[(one, CVector::basis(1))]).is_err());
    }

    #[test]
    fn search_examples() {
        assert!(search_violation(&qf(0.5), 3, 1000, 7).unwrap().is_some());
        assert!(search_violation(&qf(1.0), 4, 1000, 7).unwrap().is_none());
        let pg = StateFunctional::product_gaussian(1.0, 1.5).unwrap();
        assert!(search_violation(&pg, 4, 1000, 7).unwrap().is_none());
        assert!(scan_min_eigenvalue(&qf(1.0), 4, 1000, 7).unwrap() >= PSD_TOL);
        assert!(search_violation(&qf(1.0), 9, 10, 7).is_err());
        assert!(search_violation(&qf(1.0), 3, 0, 7).is_err());
    }

    #[test]
    fn search_is_deterministic() {
        let a = search_violation(&qf(0.9), 4, 500, 3).unwrap().unwrap();
        let b = search_violation(&qf(0.9), 4, 500, 3).unwrap().unwrap();
        assert_eq!(a, b);
        assert_eq!(sample_points(5, 17, 3), sample_points(5, 17, 3));
        assert_ne!(sample_points(5, 17, 3), sample_points(5, 18, 3));
    }

    #[test]
    fn mixture_matrix_is_convex_combination() {
        let pts = sample_points(5, 3, 99);
        let (a, b) = (qf(1.0), qf(3.0));
        let mix = StateFunctional::mixture(vec![(0.25, a.clone()), (0.75, b.clone())]).unwrap();
        let ma = moment_matrix(&a, &pts).unwrap().entries;
        let mb = moment_matrix(&b, &pts).unwrap().entries;
        let mm = moment_matrix(&mix, &pts).unwrap().entries;
        let diff = (mm - (ma.scale(0.25) + mb.scale(0.75))).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }
}

//! The `demo` command: every experiment table, written under one directory.

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::Result;
use crate::fock::FockContext;
use crate::hilbert::{build_g_n, CVector, FiniteUnitary};
use crate::positivity::{scan_min_eigenvalue, search_violation, PSD_TOL};
use crate::states::{
    clustering_deviation, fit_line_law, invariance_deviation, regularity_jump, LineLaw, StateFunctional,
    DEFAULT_T_MIN,
};
use crate::tomography::{forward_curve, invert_mixture, s2_grid, Atom, MixingMeasure};
use crate::weyl::{adjoint, automorphism_image, commutator, word_mul, WeylPolynomial};

pub struct DemoSummary {
    pub criteria: Vec<(String, bool)>,
}

impl DemoSummary {
    pub fn all_pass(&self) -> bool {
        self.criteria.iter().all(|(_, p)| *p)
    }
}

type Rows = Vec<Vec<String>>;

fn write_csv(path: &Path, header: &[&str], rows: &Rows) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($x.to_string()),*] };
}

fn dyadic<R: Rng>(rng: &mut R) -> f64 {
    rng.random_range(-8i32..=8) as f64 / 4.0
}

/// A vector on 1 to 3 modes of `[-radius, radius]` with dyadic entries.
pub(crate) fn random_vector<R: Rng>(rng: &mut R, radius: i64) -> CVector {
    let n = rng.random_range(1..=3);
    let v = CVector::from_pairs(
        (0..n).map(|_| (rng.random_range(-radius..=radius), Complex64::new(dyadic(rng), dyadic(rng)))),
    );
    if v.is_zero() {
        CVector::basis(rng.random_range(-radius..=radius))
    } else {
        v
    }
}

/// A polynomial of 1 to 3 terms with dyadic coefficients.
pub(crate) fn random_polynomial<R: Rng>(rng: &mut R, radius: i64) -> WeylPolynomial {
    let terms = rng.random_range(1..=3);
    let mut p = WeylPolynomial::zero();
    for _ in 0..terms {
        let c = Complex64::new(dyadic(rng), dyadic(rng));
        p = p + WeylPolynomial::generator(random_vector(rng, radius)).scale(c);
    }
    p
}

fn max_coeff(p: &WeylPolynomial) -> f64 {
    p.terms().iter().map(|t| t.coeff.norm()).fold(0.0, f64::max)
}

/// Regenerates every table under `dir` and writes `summary.csv`.
pub fn run_demo(seed: u64, dir: &Path) -> Result<DemoSummary> {
    fs::create_dir_all(dir)?;
    let criteria = vec![
        ("weyl_relation".to_string(), weyl_relation(seed, dir)?),
        ("vacuum".to_string(), vacuum(dir)?),
        ("thermal".to_string(), thermal(dir)?),
        ("phase_diagram".to_string(), phase_diagram(seed, dir)?),
        ("quasifree_bound".to_string(), quasifree_bound(seed, dir)?),
        ("rotatability".to_string(), rotatability(seed, dir)?),
        ("clustering".to_string(), clustering(seed, dir)?),
        ("tomography".to_string(), tomography(dir)?),
        ("regularity".to_string(), regularity(dir)?),
        ("line_law".to_string(), line_law(dir)?),
    ];
    let rows: Rows = criteria.iter().map(|(n, p)| row![n, if *p { "pass" } else { "fail" }]).collect();
    write_csv(&dir.join("summary.csv"), &["criterion", "status"], &rows)?;
    Ok(DemoSummary { criteria })
}

fn weyl_relation(seed: u64, dir: &Path) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Rows::new();
    let mut worst = 0.0f64;
    for trial in 0..200 {
        let (a, b, c) = (random_polynomial(&mut rng, 3), random_polynomial(&mut rng, 3), random_polynomial(&mut rng, 3));
        let assoc = max_coeff(&(word_mul(&word_mul(&a, &b)?, &c)? - word_mul(&a, &word_mul(&b, &c)?)?));
        let x = random_vector(&mut rng, 3);
        let w = WeylPolynomial::generator(x);
        let inverse = max_coeff(&(word_mul(&w, &adjoint(&w))? - WeylPolynomial::one()));
        worst = worst.max(assoc).max(inverse);
        rows.push(row![trial, assoc, inverse]);
    }
    write_csv(&dir.join("weyl_relation.csv"), &["trial", "assoc_diff", "inverse_diff"], &rows)?;
    Ok(worst <= 1e-12)
}

fn vacuum(dir: &Path) -> Result<bool> {
    let ctx = FockContext::single_mode(40)?;
    let mut rows = Rows::new();
    let mut worst = 0.0f64;
    for i in 0..20 {
        let r = i as f64 / 19.0;
        let x = CVector::basis(0).scale(Complex64::from_polar(r, 0.3 * i as f64));
        let fock = ctx.weyl_matrix(&x)?[(0, 0)];
        let exact = (-0.5 * r * r).exp();
        let err = (fock - exact).norm();
        worst = worst.max(err);
        rows.push(row![r, fock.re, fock.im, exact, err]);
    }
    write_csv(&dir.join("vacuum.csv"), &["norm", "fock_re", "fock_im", "exact", "abs_err"], &rows)?;
    Ok(worst <= 1e-6)
}

fn thermal(dir: &Path) -> Result<bool> {
    let ctx = FockContext::single_mode(60)?;
    let mut rows = Rows::new();
    let mut worst = 0.0f64;
    for s2 in [1.0, 2.0, 5.0] {
        let rho = ctx.thermal_density(s2)?;
        for r in [0.0, 0.25, 0.5, 0.75, 1.0] {
            for phi in [0.0, 0.9, 2.1] {
                let z = Complex64::from_polar(r, phi);
                let w = WeylPolynomial::generator(CVector::basis(0).scale(z));
                let tr = ctx.state_expectation(&rho, &w)?;
                let exact = (-0.5 * s2 * r * r).exp();
                let err = (tr - exact).norm();
                worst = worst.max(err);
                rows.push(row![s2, z.re, z.im, tr.re, tr.im, exact, err]);
            }
        }
    }
    write_csv(&dir.join("thermal.csv"), &["s2", "z_re", "z_im", "trace_re", "trace_im", "exact", "abs_err"], &rows)?;
    Ok(worst <= 1e-5)
}

const SEARCH_POINTS: usize = 6;
const SEARCH_TRIALS: usize = 1000;

/// Searches for a witness; without one, reports the smallest eigenvalue seen.
fn classify(s: &StateFunctional, seed: u64) -> Result<(bool, f64)> {
    Ok(match search_violation(s, SEARCH_POINTS, SEARCH_TRIALS, seed)? {
        Some(w) => (true, w.min_eig),
        None => (false, scan_min_eigenvalue(s, SEARCH_POINTS, SEARCH_TRIALS, seed)?),
    })
}

fn phase_diagram(seed: u64, dir: &Path) -> Result<bool> {
    let grid = [0.25, 0.6, 0.95, 1.3, 1.65, 2.0];
    let mut rows = Rows::new();
    let mut ok = true;
    for lambda in grid {
        for mu in grid {
            let (found, min_eig) = classify(&StateFunctional::product_gaussian(lambda, mu)?, seed)?;
            let expected = lambda * mu < 1.0;
            ok &= found == expected && (found || min_eig >= PSD_TOL);
            rows.push(row![lambda, mu, lambda * mu, found, min_eig]);
        }
    }
    write_csv(&dir.join("phase_diagram.csv"), &["lambda", "mu", "product", "witness", "min_eig"], &rows)?;
    Ok(ok)
}

fn quasifree_bound(seed: u64, dir: &Path) -> Result<bool> {
    let mut rows = Rows::new();
    let mut ok = true;
    for s2 in [0.25, 0.5, 0.9, 1.0, 2.0, 5.0] {
        let (found, min_eig) = classify(&StateFunctional::quasi_free(s2)?, seed)?;
        ok &= found == (s2 < 1.0) && (found || min_eig >= PSD_TOL);
        rows.push(row![s2, found, min_eig]);
    }
    write_csv(&dir.join("quasifree_bound.csv"), &["s2", "witness", "min_eig"], &rows)?;
    Ok(ok)
}

fn rotatability(seed: u64, dir: &Path) -> Result<bool> {
    let s = StateFunctional::product_gaussian(1.0, 2.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tests: Vec<WeylPolynomial> =
        (0..10).map(|_| WeylPolynomial::generator(random_vector(&mut rng, 2))).collect();
    let mut rows = Rows::new();
    let mut worst = 0.0f64;
    for i in 0..50 {
        let o = FiniteUnitary::random_orthogonal(2, &mut rng);
        let d = invariance_deviation(&s, &o, &tests)?;
        worst = worst.max(d);
        rows.push(row![format!("orthogonal_{i}"), d]);
    }
    let phase = FiniteUnitary::phase(0, FRAC_PI_2);
    let d_phase = invariance_deviation(&s, &phase, &[WeylPolynomial::generator(CVector::basis(0))])?;
    rows.push(row!["phase_i", d_phase]);
    write_csv(&dir.join("rotatability.csv"), &["map", "deviation"], &rows)?;
    Ok(worst <= 1e-12 && d_phase >= 0.23)
}

fn clustering(seed: u64, dir: &Path) -> Result<bool> {
    let states = [
        StateFunctional::Vacuum,
        StateFunctional::quasi_free(2.0)?,
        StateFunctional::product_gaussian(1.0, 2.0)?,
        StateFunctional::trace(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Rows::new();
    let mut ok = true;
    for m in 1..=4i64 {
        let n_min = (1..).find(|&n: &u32| (1i64 << (n - 1)) > m).expect("finite");
        for n in n_min..=n_min + 1 {
            for _ in 0..5 {
                let (a, b) = (random_polynomial(&mut rng, m), random_polynomial(&mut rng, m));
                let zero = commutator(&automorphism_image(&build_g_n(n), &a), &b)?.is_zero();
                let mut worst = 0.0f64;
                for s in &states {
                    worst = worst.max(clustering_deviation(s, &a, &b, n)?);
                }
                ok &= zero && worst <= 1e-14;
                rows.push(row![m, n, zero, worst]);
            }
        }
    }
    write_csv(&dir.join("clustering.csv"), &["m", "n", "commutator_zero", "max_deviation"], &rows)?;
    Ok(ok)
}

/// Measures on `[1, 6]` with their atom at infinity, used by the tomography table.
pub(crate) fn tomography_cases() -> Vec<(&'static str, Vec<(f64, f64)>, f64)> {
    vec![
        ("point_1", vec![(1.0, 1.0)], 0.0),
        ("two_atoms", vec![(1.0, 0.5), (3.0, 0.5)], 0.0),
        ("with_infinity", vec![(1.0, 0.7)], 0.3),
        ("four_atoms", vec![(1.5, 0.25), (2.5, 0.25), (4.0, 0.25), (5.5, 0.25)], 0.0),
        ("two_plus_infinity", vec![(2.0, 0.4), (4.5, 0.3)], 0.3),
        ("uneven", vec![(1.2, 0.1), (2.0, 0.2), (3.5, 0.3), (5.0, 0.4)], 0.0),
    ]
}

fn tomography(dir: &Path) -> Result<bool> {
    let grid = s2_grid(1.0, 6.0, 0.05)?;
    let ts: Vec<f64> = (0..50).map(|i| 0.1 + 2.9 * i as f64 / 49.0).collect();
    let mut rows = Rows::new();
    let mut report = Vec::new();
    let mut ok = true;
    for (name, atoms, inf) in tomography_cases() {
        let truth = MixingMeasure::new(atoms.iter().map(|&(s2, weight)| Atom { s2, weight }).collect(), inf)?;
        let samples: Vec<(f64, f64)> = ts.iter().copied().zip(forward_curve(&truth, 1.0, &ts)).collect();
        let mu = invert_mixture(&samples, 1.0, &grid, 0.0)?;
        let clusters = mu.clusters(0.075, 1e-6);
        let mut case_ok = clusters.len() == atoms.len()
            && (mu.weight_inf - inf).abs() <= 0.01
            && mu.residual <= 1e-8;
        for (c, &(s2, w)) in clusters.iter().zip(&atoms) {
            case_ok &= (c.location - s2).abs() <= 0.05 && (c.mass - w).abs() <= 0.02;
            rows.push(row![name, s2, w, c.location, c.mass]);
        }
        rows.push(row![name, "inf", inf, "inf", mu.weight_inf]);
        ok &= case_ok;
        report.push(json!({
            "case": name,
            "truth": truth,
            "recovered": mu,
            "clusters": clusters,
            "pass": case_ok,
        }));
    }
    write_csv(&dir.join("tomography.csv"), &["case", "s2", "weight", "recovered_s2", "recovered_weight"], &rows)?;
    fs::write(dir.join("tomography.json"), super::to_json(&report)? + "\n")?;
    Ok(ok)
}

fn regularity(dir: &Path) -> Result<bool> {
    let cases = [
        ("vacuum", StateFunctional::Vacuum, 0.0),
        ("qf(3)", StateFunctional::quasi_free(3.0)?, 0.0),
        ("pg(1, 2)", StateFunctional::product_gaussian(1.0, 2.0)?, 0.0),
        (
            "mix(0.5*qf(1) + 0.5*qf(3))",
            StateFunctional::mixture(vec![(0.5, StateFunctional::quasi_free(1.0)?), (0.5, StateFunctional::quasi_free(3.0)?)])?,
            0.0,
        ),
        (
            "mix(0.7*qf(1) + 0.3*trace)",
            StateFunctional::mixture(vec![(0.7, StateFunctional::quasi_free(1.0)?), (0.3, StateFunctional::trace())])?,
            0.3,
        ),
        ("trace", StateFunctional::trace(), 1.0),
    ];
    let xs = [CVector::basis(0), CVector::from_pairs([(0, Complex64::new(1.0, 1.0)), (1, Complex64::new(0.5, 0.0))])];
    let mut rows = Rows::new();
    let mut ok = true;
    for (name, s, expected) in &cases {
        for (i, x) in xs.iter().enumerate() {
            let jump = regularity_jump(s, x, DEFAULT_T_MIN)?;
            ok &= (jump - expected).abs() <= 1e-6;
            rows.push(row![name, i, jump, expected]);
        }
    }
    write_csv(&dir.join("regularity.csv"), &["state", "vector", "jump", "expected"], &rows)?;
    Ok(ok)
}

fn line_law(dir: &Path) -> Result<bool> {
    let states = [
        StateFunctional::Vacuum,
        StateFunctional::quasi_free(2.0)?,
        StateFunctional::quasi_free(5.0)?,
        StateFunctional::product_gaussian(1.0, 2.0)?,
        StateFunctional::product_gaussian(0.5, 3.0)?,
        StateFunctional::product_gaussian(2.0, 2.0)?,
    ];
    let xs = [CVector::basis(0), CVector::from_pairs([(0, Complex64::new(1.0, 1.0)), (1, Complex64::new(0.5, 0.0))])];
    let ts: Vec<f64> = (0..20).map(|i| 0.1 + 1.9 * i as f64 / 19.0).collect();
    let mut rows = Rows::new();
    let mut ok = true;
    for s in &states {
        for (i, x) in xs.iter().enumerate() {
            match fit_line_law(s, x, &ts)? {
                LineLaw::Gaussian { c, residual } => {
                    ok &= residual < 1e-10;
                    rows.push(row![s, i, c, residual]);
                }
                LineLaw::Indicator => {
                    ok = false;
                    rows.push(row![s, i, "indicator", ""]);
                }
            }
        }
    }
    write_csv(&dir.join("line_law.csv"), &["state", "vector", "c", "residual"], &rows)?;

    let ctx = FockContext::single_mode(60)?;
    let phi = ctx.field_matrix(&CVector::basis(0))?;
    let phi2 = &phi * &phi;
    let phi4 = &phi2 * &phi2;
    let mut rows = Rows::new();
    for s2 in [1.0, 2.0, 5.0] {
        let rho = ctx.thermal_density(s2)?;
        let m2 = ctx.expectation(&rho, &phi2)?.re;
        let m4 = ctx.expectation(&rho, &phi4)?.re;
        ok &= (m2 - s2).abs() <= 1e-3 && (m4 - 3.0 * s2 * s2).abs() <= 1e-3;
        rows.push(row![s2, m2, m4, 3.0 * s2 * s2]);
    }
    write_csv(&dir.join("moments.csv"), &["s2", "phi2", "phi4", "expected_phi4"], &rows)?;
    Ok(ok)
}

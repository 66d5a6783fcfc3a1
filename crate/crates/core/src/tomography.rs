//! Recovery of the mixing measure `μ` on `[1, +∞]` of a unitarily invariant
//! state from samples of `t ↦ ω(W(t x))`.
//!
//! A state of this family has
//! `ω(W(tx)) = Σ_j w_j e^{−s2_j t² ‖x‖²/2} + w_∞ [t = 0]`, so on `t > 0` the
//! samples see only the finite atoms. They are fitted by nonnegative least
//! squares over a grid of `s2` values; the mass missing from the fit is
//! assigned to the atom at infinity.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Condition number of `A_Pᵀ A_P` above which a warning is logged.
pub const CONDITION_WARN: f64 = 1e12;
/// Bound on the positive part of the gradient at the returned solution.
/// The solver itself runs until no entry on the zero set is positive.
pub const KKT_TOL: f64 = 1e-10;
pub const SAMPLE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub s2: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingMeasure {
    pub atoms: Vec<Atom>,
    pub weight_inf: f64,
    /// Root-mean-square misfit on the input samples.
    pub residual: f64,
    /// Condition estimate of the final normal matrix (0 when not from a fit).
    #[serde(default)]
    pub condition: f64,
}

/// A group of neighbouring atoms, summarized by mass and weighted location.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cluster {
    pub location: f64,
    pub mass: f64,
}

impl MixingMeasure {
    pub fn new(atoms: Vec<Atom>, weight_inf: f64) -> Result<Self> {
        if atoms.iter().any(|a| !(a.s2.is_finite() && a.s2 >= 1.0 && a.weight >= 0.0)) {
            return Err(Error::Domain("atoms need finite s2 >= 1 and weight >= 0".into()));
        }
        if !(weight_inf >= 0.0) {
            return Err(Error::Domain("weight at infinity must be nonnegative".into()));
        }
        let total = atoms.iter().map(|a| a.weight).sum::<f64>() + weight_inf;
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("measure has total mass {total}, expected 1")));
        }
        Ok(MixingMeasure { atoms, weight_inf, residual: 0.0, condition: 0.0 })
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum::<f64>() + self.weight_inf
    }

    /// Groups atoms heavier than `min_weight` whose neighbours are at most
    /// `max_gap` apart.
    pub fn clusters(&self, max_gap: f64, min_weight: f64) -> Vec<Cluster> {
        let mut atoms: Vec<Atom> = self.atoms.iter().copied().filter(|a| a.weight > min_weight).collect();
        atoms.sort_by(|a, b| a.s2.total_cmp(&b.s2));
        let mut out: Vec<(f64, f64, f64)> = Vec::new(); // (last s2, mass, mass·s2)
        for a in atoms {
            match out.last_mut() {
                Some(last) if a.s2 - last.0 <= max_gap => {
                    last.0 = a.s2;
                    last.1 += a.weight;
                    last.2 += a.weight * a.s2;
                }
                _ => out.push((a.s2, a.weight, a.weight * a.s2)),
            }
        }
        out.into_iter().map(|(_, m, ms)| Cluster { location: ms / m, mass: m }).collect()
    }

    /// `½ Σ |w − w'|` with atoms matched by location (within 1e-9), the atom
    /// at infinity included.
    pub fn total_variation(&self, other: &MixingMeasure) -> f64 {
        let mut merged: Vec<(f64, f64)> = self.atoms.iter().map(|a| (a.s2, a.weight)).collect();
        for b in &other.atoms {
            match merged.iter_mut().find(|(s, _)| (s - b.s2).abs() < 1e-9) {
                Some(entry) => entry.1 -= b.weight,
                None => merged.push((b.s2, -b.weight)),
            }
        }
        let finite: f64 = merged.iter().map(|(_, d)| d.abs()).sum();
        0.5 * (finite + (self.weight_inf - other.weight_inf).abs())
    }
}

/// `Σ_j w_j e^{−s2_j t² ‖x‖²/2}`, plus `w_∞` at `t = 0`.
pub fn forward_curve(mu: &MixingMeasure, x_norm: f64, ts: &[f64]) -> Vec<f64> {
    ts.iter()
        .map(|&t| {
            let finite: f64 =
                mu.atoms.iter().map(|a| a.weight * (-0.5 * a.s2 * t * t * x_norm * x_norm).exp()).sum();
            if t == 0.0 {
                finite + mu.weight_inf
            } else {
                finite
            }
        })
        .collect()
}

/// Inclusive grid `a, a + step, …` up to `b`.
pub fn s2_grid(a: f64, b: f64, step: f64) -> Result<Vec<f64>> {
    if !(a.is_finite() && b.is_finite() && step > 0.0 && a >= 1.0 && b >= a) {
        return Err(Error::Domain(format!("invalid grid {a}:{b}:{step}; need 1 <= a <= b and step > 0")));
    }
    let count = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| a + k as f64 * step).collect())
}

/// Fits a mixing measure to samples `(t, ω(W(t x)))` with `‖x‖ = x_norm`.
///
/// Solves `min ‖A w − v‖² + reg ‖w‖²` over `w ≥ 0` with
/// `A_{ij} = e^{−grid_j t_i² x_norm²/2}`, sets `w_∞ = max(0, 1 − Σ w)` and
/// renormalizes to unit mass.
pub fn invert_mixture(samples: &[(f64, f64)], x_norm: f64, grid: &[f64], reg: f64) -> Result<MixingMeasure> {
    if !(x_norm.is_finite() && x_norm > 0.0) {
        return Err(Error::Domain(format!("x_norm must be positive, got {x_norm}")));
    }
    if grid.is_empty() || grid.iter().any(|s| !(s.is_finite() && *s >= 1.0)) {
        return Err(Error::Domain("grid must be nonempty with finite s2 >= 1".into()));
    }
    if !(reg.is_finite() && reg >= 0.0) {
        return Err(Error::Domain(format!("regularization must be nonnegative, got {reg}")));
    }
    if samples.is_empty() {
        return Err(Error::Domain("no samples".into()));
    }
    for (index, &(t, v)) in samples.iter().enumerate() {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidSample { index, reason: format!("t = {t} must be positive") });
        }
        if !(v >= -SAMPLE_TOL && v <= 1.0 + SAMPLE_TOL) {
            return Err(Error::InvalidSample { index, reason: format!("value {v} outside [0, 1]") });
        }
    }
    let mut ts: Vec<f64> = samples.iter().map(|s| s.0).collect();
    ts.sort_by(f64::total_cmp);
    if ts.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Domain("sample t values must be distinct".into()));
    }

    let (m, n) = (samples.len(), grid.len());
    let extra = if reg > 0.0 { n } else { 0 };
    let mut a = DMatrix::zeros(m + extra, n);
    let mut b = DVector::zeros(m + extra);
    for (i, &(t, v)) in samples.iter().enumerate() {
        for (j, &s2) in grid.iter().enumerate() {
            a[(i, j)] = (-0.5 * s2 * t * t * x_norm * x_norm).exp();
        }
        b[i] = v;
    }
    for j in 0..extra {
        a[(m + j, j)] = reg.sqrt();
    }

    let fit = nnls(&a, &b, 0.0);
    if fit.condition > CONDITION_WARN {
        log::warn!("ill-conditioned mixture fit: normal matrix condition {:.3e}", fit.condition);
    }

    let finite: f64 = fit.x.iter().sum();
    let (scale, weight_inf) = if finite <= 1.0 { (1.0, 1.0 - finite) } else { (1.0 / finite, 0.0) };
    let atoms = grid
        .iter()
        .zip(fit.x.iter())
        .filter(|(_, &w)| w > 0.0)
        .map(|(&s2, &w)| Atom { s2, weight: w * scale })
        .collect();
    if fit.kkt > KKT_TOL {
        log::warn!("mixture fit stopped with stationarity defect {:.3e}", fit.kkt);
    }
    let mut mu = MixingMeasure { atoms, weight_inf, residual: 0.0, condition: fit.condition };
    let model = forward_curve(&mu, x_norm, &samples.iter().map(|s| s.0).collect::<Vec<_>>());
    let sq: f64 = model.iter().zip(samples).map(|(f, s)| (f - s.1).powi(2)).sum();
    mu.residual = (sq / m as f64).sqrt();
    Ok(mu)
}

pub(crate) struct NnlsFit {
    pub x: DVector<f64>,
    /// Condition number of `A_Pᵀ A_P` for the final passive set.
    pub condition: f64,
    /// Largest positive gradient entry at `x`.
    pub kkt: f64,
}

/// Lawson–Hanson active-set nonnegative least squares.
///
/// Works on a copy of `[A | b]` reduced in place by Householder reflections,
/// one per passive column, so gradients and trial coefficients come from the
/// orthogonal complement of the passive span. Leaving columns are retired with
/// Givens rotations.
pub(crate) fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> NnlsFit {
    let (m, n) = a.shape();
    let (mut a, mut b) = (a.clone(), b.clone());
    let mut x = DVector::<f64>::zeros(n);
    // index[..nsetp] is the passive set in pivot order, the rest is the zero set
    let mut index: Vec<usize> = (0..n).collect();
    let mut nsetp = 0;
    let mut w = DVector::<f64>::zeros(n);
    let mut zz = DVector::<f64>::zeros(m);
    let max_iter = 3 * n.max(1);
    let mut iter = 0;

    'main: while nsetp < n && nsetp < m {
        for &j in &index[nsetp..] {
            w[j] = (nsetp..m).map(|l| a[(l, j)] * b[l]).sum::<f64>();
        }
        // pick an entering column whose reflection is well defined and whose
        // trial coefficient is positive
        let entering = loop {
            let Some(&t) = index[nsetp..].iter().filter(|&&j| w[j] > tol).max_by(|&&i, &&j| w[i].total_cmp(&w[j]))
            else {
                break 'main;
            };
            let asave = a[(nsetp, t)];
            let up = householder(&mut a, t, nsetp);
            let unorm = (0..nsetp).map(|l| a[(l, t)].powi(2)).sum::<f64>().sqrt();
            if (unorm + a[(nsetp, t)].abs() * 0.01) - unorm > 0.0 {
                zz.copy_from(&b);
                reflect(&a, t, nsetp, up, zz.as_mut_slice());
                if zz[nsetp] / a[(nsetp, t)] > 0.0 {
                    break (t, up);
                }
            }
            a[(nsetp, t)] = asave;
            w[t] = 0.0;
        };
        let (t, up) = entering;
        b.copy_from(&zz);
        let pos = index[nsetp..].iter().position(|&j| j == t).expect("entering column is in the zero set") + nsetp;
        index.swap(nsetp, pos);
        nsetp += 1;
        for &j in &index[nsetp..] {
            let mut col = a.column(j).clone_owned();
            reflect(&a, t, nsetp - 1, up, col.as_mut_slice());
            a.set_column(j, &col);
        }
        for l in nsetp..m {
            a[(l, t)] = 0.0;
        }
        w[t] = 0.0;

        loop {
            back_substitute(&a, &b, &index[..nsetp], &mut zz);
            iter += 1;
            if iter > max_iter {
                log::warn!("nonnegative least squares hit its iteration limit");
                break 'main;
            }
            let mut alpha = 2.0;
            let mut leaving = 0;
            for (ip, &l) in index[..nsetp].iter().enumerate() {
                if zz[ip] <= 0.0 {
                    let step = -x[l] / (zz[ip] - x[l]);
                    if alpha > step {
                        alpha = step;
                        leaving = ip;
                    }
                }
            }
            if alpha == 2.0 {
                break;
            }
            for (ip, &l) in index[..nsetp].iter().enumerate() {
                x[l] += alpha * (zz[ip] - x[l]);
            }
            // retire `leaving`, then anything else driven to zero
            let mut jj = Some(leaving);
            while let Some(pos) = jj {
                let retired = index[pos];
                x[retired] = 0.0;
                for j in pos + 1..nsetp {
                    let ii = index[j];
                    index[j - 1] = ii;
                    let (c, s, r) = givens(a[(j - 1, ii)], a[(j, ii)]);
                    a[(j - 1, ii)] = r;
                    a[(j, ii)] = 0.0;
                    for l in (0..n).filter(|&l| l != ii) {
                        let (u, v) = (a[(j - 1, l)], a[(j, l)]);
                        a[(j - 1, l)] = c * u + s * v;
                        a[(j, l)] = -s * u + c * v;
                    }
                    let (u, v) = (b[j - 1], b[j]);
                    b[j - 1] = c * u + s * v;
                    b[j] = -s * u + c * v;
                }
                nsetp -= 1;
                index[nsetp] = retired;
                jj = index[..nsetp].iter().position(|&i| x[i] <= 0.0);
            }
        }
        for (ip, &l) in index[..nsetp].iter().enumerate() {
            x[l] = zz[ip];
        }
    }

    let kkt = index[nsetp..].iter().map(|&j| (nsetp..m).map(|l| a[(l, j)] * b[l]).sum::<f64>()).fold(0.0, f64::max);
    let passive: Vec<usize> = index[..nsetp].to_vec();
    let condition = if passive.is_empty() {
        1.0
    } else {
        let sv = a.select_rows(&(0..nsetp).collect::<Vec<_>>()).select_columns(&passive).singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        if smin > 0.0 { (smax / smin).powi(2) } else { f64::INFINITY }
    };
    NnlsFit { x, condition, kkt }
}

/// Builds the reflection that zeroes column `j` below row `p`. Returns the
/// pivot term `up`; the new diagonal entry is written to `a[(p, j)]` and the
/// reflection vector stays in the rows below it.
fn householder(a: &mut DMatrix<f64>, j: usize, p: usize) -> f64 {
    let m = a.nrows();
    let cl = (p..m).map(|l| a[(l, j)].abs()).fold(0.0, f64::max);
    if cl <= 0.0 {
        return 0.0;
    }
    let sm: f64 = (p..m).map(|l| (a[(l, j)] / cl).powi(2)).sum();
    let mut d = cl * sm.sqrt();
    if a[(p, j)] > 0.0 {
        d = -d;
    }
    let up = a[(p, j)] - d;
    a[(p, j)] = d;
    up
}

/// Applies the reflection stored in column `j` (pivot row `p`) to `c`.
fn reflect(a: &DMatrix<f64>, j: usize, p: usize, up: f64, c: &mut [f64]) {
    let m = a.nrows();
    let beta = up * a[(p, j)];
    if beta >= 0.0 {
        return;
    }
    let sm = c[p] * up + (p + 1..m).map(|i| c[i] * a[(i, j)]).sum::<f64>();
    if sm != 0.0 {
        let sm = sm / beta;
        c[p] += sm * up;
        for i in p + 1..m {
            c[i] += sm * a[(i, j)];
        }
    }
}

/// Solves the triangular system on the passive columns into `zz[..k]`.
fn back_substitute(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[usize], zz: &mut DVector<f64>) {
    let k = passive.len();
    for l in 0..k {
        zz[l] = b[l];
    }
    for ip in (0..k).rev() {
        let j = passive[ip];
        zz[ip] /= a[(ip, j)];
        for l in 0..ip {
            zz[l] -= a[(l, j)] * zz[ip];
        }
    }
}

/// Rotation `(c, s)` with `c·u + s·v = r` and `−s·u + c·v = 0`.
fn givens(u: f64, v: f64) -> (f64, f64, f64) {
    let r = u.hypot(v);
    if r == 0.0 {
        return (1.0, 0.0, 0.0);
    }
    (u / r, v / r, r)
}
/// Reads `(t, value)` pairs from CSV with a mandatory header row.
pub fn read_samples_csv<R: Read>(reader: R) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 {
        return Err(Error::Domain(format!("expected a 2-column header (t, value), got {headers:?}")));
    }
    let mut out = Vec::new();
    for (index, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidSample { index, reason: format!("`{s}` is not a number") })
        };
        if rec.len() != 2 {
            return Err(Error::InvalidSample { index, reason: "expected 2 fields".into() });
        }
        out.push((parse(&rec[0])?, parse(&rec[1])?));
    }
    Ok(out)
}

pub fn write_samples_csv<W: Write>(writer: W, samples: &[(f64, f64)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["t", "value"])?;
    for (t, v) in samples {
        wtr.write_record([t.to_string(), v.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn measure(atoms: &[(f64, f64)], inf: f64) -> MixingMeasure {
        MixingMeasure::new(atoms.iter().map(|&(s2, weight)| Atom { s2, weight }).collect(), inf).unwrap()
    }

    fn ts() -> Vec<f64> {
        (0..50).map(|i| 0.1 + 2.9 * i as f64 / 49.0).collect()
    }

    fn samples(mu: &MixingMeasure) -> Vec<(f64, f64)> {
        let ts = ts();
        ts.iter().copied().zip(forward_curve(mu, 1.0, &ts)).collect()
    }

    #[test]
    fn forward_examples() {
        let point = measure(&[(1.0, 1.0)], 0.0);
        assert!((forward_curve(&point, 1.0, &[1.0])[0] - (-0.5f64).exp()).abs() < 1e-15);

        let tr = measure(&[], 1.0);
        assert_eq!(forward_curve(&tr, 1.0, &[0.5, 0.0]), vec![0.0, 1.0]);

        let two = measure(&[(1.0, 0.6), (2.0, 0.4)], 0.0);
        let v = forward_curve(&two, 1.0, &[1.0, 0.0]);
        assert!((v[0] - (0.6 * (-0.5f64).exp() + 0.4 * (-1.0f64).exp())).abs() < 1e-15);
        assert!((v[0] - 0.5110).abs() < 1e-4);
        assert_eq!(v[1], 1.0);
    }

    #[test]
    fn nnls_small_problem() {
        // unconstrained optimum (1, −1) is infeasible; constrained one is (0.5, 0)
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 0.0]);
        let fit = nnls(&a, &b, 1e-12);
        assert!((fit.x[0] - 0.5).abs() < 1e-14 && fit.x[1] == 0.0);
        // KKT: gradient nonpositive on the zero set
        let g = a.transpose() * (b - &a * &fit.x);
        assert!(g[1] <= 1e-12 && fit.kkt <= KKT_TOL);
    }

    #[test]
    fn point_mass_round_trip() {
        let grid = s2_grid(1.0, 6.0, 0.05).unwrap();
        let mu = invert_mixture(&samples(&measure(&[(1.0, 1.0)], 0.0)), 1.0, &grid, 0.0).unwrap();
        let cl = mu.clusters(0.075, 1e-6);
        assert_eq!(cl.len(), 1);
        assert!((cl[0].location - 1.0).abs() <= 0.05 && cl[0].mass >= 0.99);
        assert!(mu.residual <= 1e-8);
        assert!((mu.total_mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_atom_round_trip() {
        let grid = s2_grid(1.0, 6.0, 0.05).unwrap();
        let mu = invert_mixture(&samples(&measure(&[(1.0, 0.5), (3.0, 0.5)], 0.0)), 1.0, &grid, 0.0).unwrap();
        let cl = mu.clusters(0.075, 1e-6);
        assert_eq!(cl.len(), 2);
        for (c, loc) in cl.iter().zip([1.0, 3.0]) {
            assert!((c.location - loc).abs() <= 0.05 && (c.mass - 0.5).abs() <= 0.02, "{c:?}");
        }
    }

    #[test]
    fn mass_at_infinity_is_the_deficit() {
        let grid = s2_grid(1.0, 6.0, 0.05).unwrap();
        let mu = invert_mixture(&samples(&measure(&[(1.0, 0.7)], 0.3)), 1.0, &grid, 0.0).unwrap();
        assert!((mu.weight_inf - 0.3).abs() <= 0.01);
        assert!((mu.atoms.iter().map(|a| a.weight).sum::<f64>() - 0.7).abs() <= 0.01);
    }

    #[test]
    fn ridge_keeps_mass_normalized() {
        let grid = s2_grid(1.0, 8.0, 0.05).unwrap();
        let mu = invert_mixture(&samples(&measure(&[(2.0, 1.0)], 0.0)), 1.0, &grid, 1e-6).unwrap();
        assert!((mu.total_mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_samples() {
        let grid = s2_grid(1.0, 2.0, 0.5).unwrap();
        assert!(matches!(
            invert_mixture(&[(0.5, 1.2)], 1.0, &grid, 0.0),
            Err(Error::InvalidSample { index: 0, .. })
        ));
        assert!(matches!(invert_mixture(&[(0.0, 0.5)], 1.0, &grid, 0.0), Err(Error::InvalidSample { .. })));
        assert!(invert_mixture(&[(0.5, 0.5), (0.5, 0.4)], 1.0, &grid, 0.0).is_err());
        assert!(invert_mixture(&[(0.5, 0.5)], 0.0, &grid, 0.0).is_err());
        assert!(s2_grid(0.5, 2.0, 0.1).is_err());
    }

    #[test]
    fn grid_endpoints() {
        let g = s2_grid(1.0, 8.0, 0.05).unwrap();
        assert_eq!(g.len(), 141);
        assert_eq!(g[0], 1.0);
        assert!((g[140] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let data = vec![(0.1, 0.99), (0.2, 0.5)];
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, &data).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "t,value\n0.1,0.99\n0.2,0.5\n");
        assert_eq!(read_samples_csv(buf.as_slice()).unwrap(), data);
        assert!(read_samples_csv("t,value\n0.1,abc\n".as_bytes()).is_err());
    }
}

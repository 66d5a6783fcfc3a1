//! Closed-form characteristic functionals `G(x) = ω(W(x))` and the checks
//! built on them: rotatability, invariance, clustering and regularity.

use std::fmt;

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::hilbert::{build_g_n, CVector, FiniteUnitary, MapKind};
use crate::weyl::{automorphism_image, word_mul, WeylPolynomial};

/// Mixture weights must sum to one within this.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Default smallest ray parameter for [`regularity_jump`].
pub const DEFAULT_T_MIN: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub enum StateFunctional {
    /// `G(x) = e^{−‖x‖²/2}`.
    Vacuum,
    /// `G(x) = e^{−s2‖x‖²/2}`; `s2 = +∞` is the canonical trace.
    QuasiFree { s2: f64 },
    /// `G(x) = ∏_k e^{−(λ Re(x_k)² + μ Im(x_k)²)/2}` on localized `x`.
    ProductGaussian { lambda: f64, mu: f64 },
    Mixture(Vec<(f64, StateFunctional)>),
    /// Agrees with `inner` on localized vectors and vanishes elsewhere.
    FlatExtension(Box<StateFunctional>),
}

impl StateFunctional {
    pub fn quasi_free(s2: f64) -> Result<Self> {
        if s2.is_nan() || s2 <= 0.0 {
            return Err(Error::Domain(format!("quasi-free variance must be positive, got {s2}")));
        }
        Ok(StateFunctional::QuasiFree { s2 })
    }

    /// The canonical trace `ω_∞`.
    pub fn trace() -> Self {
        StateFunctional::QuasiFree { s2: f64::INFINITY }
    }

    pub fn product_gaussian(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda.is_finite() && mu.is_finite() && lambda >= 0.0 && mu >= 0.0) {
            return Err(Error::Domain(format!(
                "product Gaussian needs finite lambda, mu >= 0, got ({lambda}, {mu})"
            )));
        }
        Ok(StateFunctional::ProductGaussian { lambda, mu })
    }

    pub fn mixture(atoms: Vec<(f64, StateFunctional)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Domain("mixture needs at least one atom".into()));
        }
        if let Some((w, _)) = atoms.iter().find(|(w, _)| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Domain(format!("mixture weight {w} is not a finite nonnegative number")));
        }
        let total: f64 = atoms.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Domain(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(StateFunctional::Mixture(atoms))
    }

    pub fn flat(inner: StateFunctional) -> Self {
        StateFunctional::FlatExtension(Box::new(inner))
    }

    /// Product-type functionals factor over modes.
    pub fn is_product_type(&self) -> bool {
        matches!(
            self,
            StateFunctional::Vacuum | StateFunctional::QuasiFree { .. } | StateFunctional::ProductGaussian { .. }
        )
    }

    /// `G(x)`. All implemented families have real characteristic functions.
    pub fn characteristic(&self, x: &CVector) -> Result<f64> {
        Ok(match self {
            StateFunctional::Vacuum => (-0.5 * x.norm_sqr()).exp(),
            StateFunctional::QuasiFree { s2 } if s2.is_infinite() => {
                if x.is_zero() {
                    1.0
                } else {
                    0.0
                }
            }
            StateFunctional::QuasiFree { s2 } => (-0.5 * s2 * x.norm_sqr()).exp(),
            StateFunctional::ProductGaussian { lambda, mu } => {
                if !x.is_localized() {
                    return Err(Error::NonLocalized { excess: x.excess() });
                }
                let alpha: f64 =
                    x.coeffs().values().map(|z| lambda * z.re * z.re + mu * z.im * z.im).sum();
                (-0.5 * alpha).exp()
            }
            StateFunctional::Mixture(atoms) => {
                let mut acc = 0.0;
                for (w, s) in atoms {
                    acc += w * s.characteristic(x)?;
                }
                acc
            }
            StateFunctional::FlatExtension(inner) => {
                if x.is_localized() {
                    inner.characteristic(x)?
                } else {
                    0.0
                }
            }
        })
    }

    /// Total weight this functional puts on the trace.
    pub fn trace_weight(&self) -> f64 {
        match self {
            StateFunctional::QuasiFree { s2 } if s2.is_infinite() => 1.0,
            StateFunctional::Mixture(atoms) => atoms.iter().map(|(w, s)| w * s.trace_weight()).sum(),
            StateFunctional::FlatExtension(inner) => inner.trace_weight(),
            _ => 0.0,
        }
    }
}

/// `Σ_j c_j G(x_j)`.
pub fn evaluate(s: &StateFunctional, a: &WeylPolynomial) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for t in a.terms() {
        acc += t.coeff * s.characteristic(&t.vector)?;
    }
    Ok(acc)
}

/// `|G(z e_k) − ∏_j G(O_{j,k} z e_j)|`.
pub fn rotatability_residual(s: &StateFunctional, o: &FiniteUnitary, z: Complex64, k: i64) -> Result<f64> {
    if o.kind() == MapKind::Injection {
        return Err(Error::InvalidMap("rotatability needs a unitary or orthogonal map".into()));
    }
    let lhs = s.characteristic(&CVector::from_pairs([(k, z)]))?;
    let column = o.apply(&CVector::from_pairs([(k, z)]));
    let mut rhs = 1.0;
    for (&j, &c) in column.coeffs() {
        rhs *= s.characteristic(&CVector::from_pairs([(j, c)]))?;
    }
    Ok((lhs - rhs).abs())
}

/// `max_a |ω(ρ_U(a)) − ω(a)|` over the test polynomials.
pub fn invariance_deviation(s: &StateFunctional, u: &FiniteUnitary, tests: &[WeylPolynomial]) -> Result<f64> {
    let mut worst = 0.0f64;
    for a in tests {
        let d = (evaluate(s, &automorphism_image(u, a))? - evaluate(s, a)?).norm();
        worst = worst.max(d);
    }
    Ok(worst)
}

/// `|ω(ρ_{g_n}(a) b) − ω(a) ω(b)|`.
pub fn clustering_deviation(s: &StateFunctional, a: &WeylPolynomial, b: &WeylPolynomial, n: u32) -> Result<f64> {
    let moved = automorphism_image(&build_g_n(n), a);
    let joint = evaluate(s, &word_mul(&moved, b)?)?;
    Ok((joint - evaluate(s, a)? * evaluate(s, b)?).norm())
}

/// Jump of `t ↦ ω(W(tx))` at `t = 0`, i.e. `1 − lim_{t→0+} ω(W(tx))`.
///
/// The limit is estimated by Richardson extrapolation on `t_min`, `t_min/2`,
/// `t_min/4`, eliminating the `t²` and `t⁴` terms of the even expansion.
pub fn regularity_jump(s: &StateFunctional, x: &CVector, t_min: f64) -> Result<f64> {
    if x.is_zero() {
        return Err(Error::ZeroVector);
    }
    if !(t_min.is_finite() && t_min > 0.0) {
        return Err(Error::Domain(format!("t_min must be positive, got {t_min}")));
    }
    let f = |t: f64| s.characteristic(&x.scale(Complex64::new(t, 0.0)));
    let (f1, f2, f3) = (f(t_min)?, f(t_min / 2.0)?, f(t_min / 4.0)?);
    let r1 = (4.0 * f2 - f1) / 3.0;
    let r2 = (4.0 * f3 - f2) / 3.0;
    let limit = (16.0 * r2 - r1) / 15.0;
    Ok(1.0 - limit)
}

/// Shape of `t ↦ G(t x)` along a ray.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum LineLaw {
    /// `G(tx) ≈ e^{−c t²}`; `residual` is the max misfit of `log G` on the fit nodes.
    Gaussian { c: f64, residual: f64 },
    /// `G(tx) = 0` for every sampled `t ≠ 0`.
    Indicator,
}

/// Least-squares fit of `log G(tx) = −c t²` over `ts`.
pub fn fit_line_law(s: &StateFunctional, x: &CVector, ts: &[f64]) -> Result<LineLaw> {
    let mut samples = Vec::with_capacity(ts.len());
    for &t in ts {
        samples.push((t, s.characteristic(&x.scale(Complex64::new(t, 0.0)))?));
    }
    if samples.iter().all(|&(_, g)| g == 0.0) {
        return Ok(LineLaw::Indicator);
    }
    if let Some(&(t, g)) = samples.iter().find(|&&(_, g)| g <= 0.0) {
        return Err(Error::Domain(format!("G({t}·x) = {g} is not positive; no Gaussian fit")));
    }
    let num: f64 = samples.iter().map(|&(t, g)| -t * t * g.ln()).sum();
    let den: f64 = samples.iter().map(|&(t, _)| t.powi(4)).sum();
    let c = num / den;
    let residual = samples
        .iter()
        .map(|&(t, g)| (g.ln() + c * t * t).abs())
        .fold(0.0, f64::max);
    Ok(LineLaw::Gaussian { c, residual })
}

impl fmt::Display for StateFunctional {
    /// Prints in the expression language accepted by [`crate::dsl::parse_state`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateFunctional::Vacuum => write!(f, "vacuum"),
            StateFunctional::QuasiFree { s2 } if s2.is_infinite() => write!(f, "trace"),
            StateFunctional::QuasiFree { s2 } => write!(f, "qf({s2})"),
            StateFunctional::ProductGaussian { lambda, mu } => write!(f, "pg({lambda}, {mu})"),
            StateFunctional::Mixture(atoms) => {
                write!(f, "mix(")?;
                for (i, (w, s)) in atoms.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{w}*{s}")?;
                }
                write!(f, ")")
            }
            StateFunctional::FlatExtension(inner) => write!(f, "flat({inner})"),
        }
    }
}

// JSON: {"variant":"quasifree","s2":2.0}, with s2 = "inf" for the trace.

#[derive(Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
enum StateRepr {
    Vacuum,
    #[serde(rename = "quasifree")]
    QuasiFree {
        s2: Variance,
    },
    ProductGaussian {
        lambda: f64,
        mu: f64,
    },
    Mixture {
        atoms: Vec<(f64, StateFunctional)>,
    },
    Flat {
        inner: Box<StateFunctional>,
    },
}

struct Variance(f64);

impl Serialize for Variance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Variance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Variance(v)),
            Raw::Text(t) if t == "inf" => Ok(Variance(f64::INFINITY)),
            Raw::Text(t) => Err(D::Error::custom(format!("expected a number or \"inf\", got \"{t}\""))),
        }
    }
}

impl Serialize for StateFunctional {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match self.clone() {
            StateFunctional::Vacuum => StateRepr::Vacuum,
            StateFunctional::QuasiFree { s2 } => StateRepr::QuasiFree { s2: Variance(s2) },
            StateFunctional::ProductGaussian { lambda, mu } => StateRepr::ProductGaussian { lambda, mu },
            StateFunctional::Mixture(atoms) => StateRepr::Mixture { atoms },
            StateFunctional::FlatExtension(inner) => StateRepr::Flat { inner },
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for StateFunctional {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match StateRepr::deserialize(d)? {
            StateRepr::Vacuum => Ok(StateFunctional::Vacuum),
            StateRepr::QuasiFree { s2 } => StateFunctional::quasi_free(s2.0),
            StateRepr::ProductGaussian { lambda, mu } => StateFunctional::product_gaussian(lambda, mu),
            StateRepr::Mixture { atoms } => StateFunctional::mixture(atoms),
            StateRepr::Flat { inner } => Ok(StateFunctional::FlatExtension(inner)),
        }
        .map_err(D::Error::custom)
    }
}

//! Finite linear combinations of Weyl generators `W(x)` under
//! `W(x)W(y) = e^{iσ(x,y)} W(x+y)` and `W(x)* = W(−x)`.

use std::cmp::Ordering;
use std::ops::{Add, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hilbert::{symplectic_form, CVector, FiniteUnitary, PRUNE_EPS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    #[serde(with = "complex_pair")]
    pub coeff: Complex64,
    pub vector: CVector,
}

/// A Weyl polynomial in canonical form: terms sorted by
/// [`CVector::canonical_cmp`], equal vectors merged, zero coefficients dropped.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<Term>", into = "Vec<Term>")]
pub struct WeylPolynomial {
    terms: Vec<Term>,
}

impl From<Vec<Term>> for WeylPolynomial {
    fn from(terms: Vec<Term>) -> Self {
        WeylPolynomial::from_terms(terms)
    }
}

impl From<WeylPolynomial> for Vec<Term> {
    fn from(p: WeylPolynomial) -> Self {
        p.terms
    }
}

/// Norm of a polynomial: exact for at most one term, otherwise the
/// triangle-inequality bound `Σ|c_j|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    pub upper_bound: bool,
}

impl WeylPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    /// The unit `W(0)`.
    pub fn one() -> Self {
        Self::scalar(Complex64::new(1.0, 0.0))
    }

    pub fn scalar(c: Complex64) -> Self {
        Self::from_terms(vec![Term { coeff: c, vector: CVector::zero() }])
    }

    pub fn generator(x: CVector) -> Self {
        Self::from_terms(vec![Term { coeff: Complex64::new(1.0, 0.0), vector: x }])
    }

    pub fn from_terms(mut terms: Vec<Term>) -> Self {
        terms.sort_by(|a, b| a.vector.canonical_cmp(&b.vector));
        let mut merged: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged.last_mut() {
                Some(last) if last.vector.canonical_cmp(&t.vector) == Ordering::Equal => {
                    last.coeff += t.coeff;
                }
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coeff.norm() >= PRUNE_EPS);
        WeylPolynomial { terms: merged }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::from_terms(
            self.terms.iter().map(|t| Term { coeff: c * t.coeff, vector: t.vector.clone() }).collect(),
        )
    }

    /// Largest `|k|` over all term supports.
    pub fn support_radius(&self) -> Option<i64> {
        self.terms.iter().filter_map(|t| t.vector.support_radius()).max()
    }

    pub fn is_localized(&self) -> bool {
        self.terms.iter().all(|t| t.vector.is_localized())
    }

    /// Term-by-term comparison with coefficient and vector tolerance `tol`.
    pub fn approx_eq(&self, other: &WeylPolynomial, tol: f64) -> bool {
        self.terms.len() == other.terms.len()
            && self.terms.iter().zip(&other.terms).all(|(a, b)| {
                (a.coeff - b.coeff).norm() <= tol && a.vector.approx_eq(&b.vector, tol)
            })
    }
}

/// Bilinear extension of `W(x)W(y) = e^{iσ(x,y)} W(x+y)`.
pub fn word_mul(a: &WeylPolynomial, b: &WeylPolynomial) -> Result<WeylPolynomial> {
    let mut out = Vec::with_capacity(a.terms.len() * b.terms.len());
    for s in &a.terms {
        for t in &b.terms {
            let phase = Complex64::from_polar(1.0, symplectic_form(&s.vector, &t.vector)?);
            out.push(Term { coeff: s.coeff * t.coeff * phase, vector: s.vector.add(&t.vector)? });
        }
    }
    Ok(WeylPolynomial::from_terms(out))
}

/// `(c, x) ↦ (conj c, −x)`.
pub fn adjoint(a: &WeylPolynomial) -> WeylPolynomial {
    WeylPolynomial::from_terms(
        a.terms.iter().map(|t| Term { coeff: t.coeff.conj(), vector: t.vector.neg() }).collect(),
    )
}

/// `ρ_U(W(x)) = W(Ux)` extended linearly.
pub fn automorphism_image(u: &FiniteUnitary, a: &WeylPolynomial) -> WeylPolynomial {
    WeylPolynomial::from_terms(
        a.terms.iter().map(|t| Term { coeff: t.coeff, vector: u.apply(&t.vector) }).collect(),
    )
}

/// `ab − ba`.
pub fn commutator(a: &WeylPolynomial, b: &WeylPolynomial) -> Result<WeylPolynomial> {
    Ok(word_mul(a, b)? - word_mul(b, a)?)
}

pub fn single_word_norm(a: &WeylPolynomial) -> NormEstimate {
    let value = a.terms.iter().map(|t| t.coeff.norm()).sum();
    NormEstimate { value, upper_bound: a.terms.len() > 1 }
}

impl Add for WeylPolynomial {
    type Output = WeylPolynomial;

    fn add(mut self, rhs: WeylPolynomial) -> WeylPolynomial {
        self.terms.extend(rhs.terms);
        WeylPolynomial::from_terms(self.terms)
    }
}

impl Neg for WeylPolynomial {
    type Output = WeylPolynomial;

    fn neg(self) -> WeylPolynomial {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Sub for WeylPolynomial {
    type Output = WeylPolynomial;

    fn sub(self, rhs: WeylPolynomial) -> WeylPolynomial {
        self + (-rhs)
    }
}

pub(crate) mod complex_pair {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(c: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [c.re, c.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}

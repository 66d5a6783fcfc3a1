//! Mode-indexed vectors of the one-particle space and the windowed linear
//! maps (unitaries, orthogonals, permutations, injections) acting on them.
//!
//! A [`CVector`] is finitely supported on the basis `{e_k : k ∈ ℤ}` and may
//! carry an `excess`: the norm of a component orthogonal to the span of that
//! basis. Only the norm of that component is ever needed, so it is stored as
//! a single nonnegative scalar.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Coefficients with modulus below this are dropped.
pub const PRUNE_EPS: f64 = 1e-15;

/// Tolerance on `U*U = I` for the unitary kinds.
pub const UNITARY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CVector {
    coeffs: BTreeMap<i64, Complex64>,
    excess: f64,
}

impl CVector {
    pub fn zero() -> Self {
        Self::default()
    }

    /// The basis vector `e_k`.
    pub fn basis(k: i64) -> Self {
        Self::from_pairs([(k, Complex64::new(1.0, 0.0))])
    }

    /// Builds a localized vector; repeated modes are summed.
    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (i64, Complex64)>,
    {
        let mut coeffs = BTreeMap::new();
        for (k, c) in pairs {
            *coeffs.entry(k).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        let mut v = CVector { coeffs, excess: 0.0 };
        v.prune();
        v
    }

    /// Returns a copy carrying the given excess norm.
    ///
    /// # Panics
    /// If `excess` is negative or not finite.
    pub fn with_excess(mut self, excess: f64) -> Self {
        assert!(excess.is_finite() && excess >= 0.0, "excess must be a finite nonnegative number");
        self.excess = excess;
        self
    }

    fn prune(&mut self) {
        self.coeffs.retain(|_, c| c.norm() >= PRUNE_EPS);
        // fold -0.0 into +0.0 so canonical ordering sees a single zero
        for c in self.coeffs.values_mut() {
            *c = Complex64::new(c.re + 0.0, c.im + 0.0);
        }
    }

    pub fn coeffs(&self) -> &BTreeMap<i64, Complex64> {
        &self.coeffs
    }

    pub fn coeff(&self, k: i64) -> Complex64 {
        self.coeffs.get(&k).copied().unwrap_or_default()
    }

    pub fn excess(&self) -> f64 {
        self.excess
    }

    pub fn is_localized(&self) -> bool {
        self.excess == 0.0
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty() && self.excess == 0.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm_sqr()).sum::<f64>() + self.excess * self.excess
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Largest `|k|` over the support, `None` for a vector with empty support.
    pub fn support_radius(&self) -> Option<i64> {
        self.coeffs.keys().map(|k| k.abs()).max()
    }

    pub fn support(&self) -> impl Iterator<Item = i64> + '_ {
        self.coeffs.keys().copied()
    }

    pub fn scale(&self, c: Complex64) -> CVector {
        let mut v = CVector {
            coeffs: self.coeffs.iter().map(|(&k, &x)| (k, c * x)).collect(),
            excess: self.excess * c.norm(),
        };
        v.prune();
        v
    }

    pub fn neg(&self) -> CVector {
        let mut v = CVector {
            coeffs: self.coeffs.iter().map(|(&k, &x)| (k, -x)).collect(),
            excess: self.excess,
        };
        v.prune();
        v
    }

    /// Vector sum. The excess components of two different vectors have an
    /// unknown relative direction, so at most one of them may carry one
    /// unless the operands are equal.
    pub fn add(&self, other: &CVector) -> Result<CVector> {
        let excess = combine_excess(self, other, |a, b| a + b)?;
        let mut coeffs = self.coeffs.clone();
        for (&k, &c) in &other.coeffs {
            *coeffs.entry(k).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        let mut v = CVector { coeffs, excess };
        v.prune();
        Ok(v)
    }

    pub fn sub(&self, other: &CVector) -> Result<CVector> {
        if self.excess > 0.0 && other.excess > 0.0 && self == other {
            return Ok(CVector::zero());
        }
        self.add(&other.neg())
    }

    /// Total order used to sort Weyl polynomial terms: support index set,
    /// then real parts, then imaginary parts, then excess.
    pub fn canonical_cmp(&self, other: &CVector) -> Ordering {
        self.coeffs
            .keys()
            .cmp(other.coeffs.keys())
            .then_with(|| {
                for (a, b) in self.coeffs.values().zip(other.coeffs.values()) {
                    let o = a.re.total_cmp(&b.re);
                    if o != Ordering::Equal {
                        return o;
                    }
                }
                Ordering::Equal
            })
            .then_with(|| {
                for (a, b) in self.coeffs.values().zip(other.coeffs.values()) {
                    let o = a.im.total_cmp(&b.im);
                    if o != Ordering::Equal {
                        return o;
                    }
                }
                Ordering::Equal
            })
            .then_with(|| self.excess.total_cmp(&other.excess))
    }

    /// Equality up to `tol` per coefficient and on the excess.
    pub fn approx_eq(&self, other: &CVector, tol: f64) -> bool {
        let keys: std::collections::BTreeSet<i64> =
            self.coeffs.keys().chain(other.coeffs.keys()).copied().collect();
        keys.iter().all(|&k| (self.coeff(k) - other.coeff(k)).norm() <= tol)
            && (self.excess - other.excess).abs() <= tol
    }
}

fn combine_excess(x: &CVector, y: &CVector, f: impl Fn(f64, f64) -> f64) -> Result<f64> {
    match (x.excess > 0.0, y.excess > 0.0) {
        (true, true) if std::ptr::eq(x, y) || x == y => Ok(f(x.excess, y.excess)),
        (true, true) => Err(Error::BothExcess),
        (true, false) => Ok(x.excess),
        (false, true) => Ok(y.excess),
        (false, false) => Ok(0.0),
    }
}

/// `⟨x, y⟩ = Σ_k x_k conj(y_k)`, linear in the first argument.
///
/// The excess contributes `excess²` only when both arguments are the same
/// vector; if two different vectors both carry excess the result is
/// undefined and [`Error::BothExcess`] is returned.
pub fn inner_product(x: &CVector, y: &CVector) -> Result<Complex64> {
    let excess_term = match (x.excess > 0.0, y.excess > 0.0) {
        (true, true) if std::ptr::eq(x, y) || x == y => x.excess * x.excess,
        (true, true) => return Err(Error::BothExcess),
        _ => 0.0,
    };
    let (small, large, swapped) = if x.coeffs.len() <= y.coeffs.len() {
        (x, y, false)
    } else {
        (y, x, true)
    };
    let mut acc = Complex64::new(excess_term, 0.0);
    for (k, a) in &small.coeffs {
        if let Some(b) = large.coeffs.get(k) {
            acc += if swapped { b * a.conj() } else { a * b.conj() };
        }
    }
    Ok(acc)
}

/// `σ(x, y) = Im⟨x, y⟩`.
pub fn symplectic_form(x: &CVector, y: &CVector) -> Result<f64> {
    inner_product(x, y).map(|z| z.im)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapKind {
    Unitary,
    RealOrthogonal,
    Permutation,
    Injection,
}

/// Injective relabeling `i ↦ scale·i + offset` of the basis (e.g. the shift).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Injection {
    pub scale: i64,
    pub offset: i64,
}

impl Injection {
    pub fn image(&self, i: i64) -> i64 {
        self.scale * i + self.offset
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Action {
    Matrix(DMatrix<Complex64>),
    /// Images of modes `-N..=N`.
    Permutation(Vec<i64>),
    /// The involution `g_n`, evaluated from its closed form.
    BlockSwap(u32),
    Injection(Injection),
}

/// A linear map of the one-particle space that is the identity outside the
/// window `[-N, N]` (injections excepted) and on the excess component.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteUnitary {
    window: usize,
    kind: MapKind,
    action: Action,
}

impl FiniteUnitary {
    pub fn identity(window: usize) -> Self {
        FiniteUnitary {
            window,
            kind: MapKind::Permutation,
            action: Action::Permutation((-(window as i64)..=window as i64).collect()),
        }
    }

    /// Wraps a `(2N+1)×(2N+1)` unitary; rows and columns are indexed by
    /// modes `-N..=N`. The kind is `RealOrthogonal` when every entry is real.
    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Result<Self> {
        let real = matrix.iter().all(|z| z.im == 0.0);
        let kind = if real { MapKind::RealOrthogonal } else { MapKind::Unitary };
        Self::with_kind(matrix, kind)
    }

    pub fn unitary(matrix: DMatrix<Complex64>) -> Result<Self> {
        Self::with_kind(matrix, MapKind::Unitary)
    }

    pub fn real_orthogonal(matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.iter().any(|z| z.im != 0.0) {
            return Err(Error::InvalidMap("real-orthogonal matrix has imaginary entries".into()));
        }
        Self::with_kind(matrix, MapKind::RealOrthogonal)
    }

    fn with_kind(matrix: DMatrix<Complex64>, kind: MapKind) -> Result<Self> {
        let (r, c) = matrix.shape();
        if r != c || r % 2 == 0 {
            return Err(Error::InvalidMap(format!(
                "matrix must be square with odd size 2N+1, got {r}x{c}"
            )));
        }
        let deviation = unitarity_deviation(&matrix);
        if deviation > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(FiniteUnitary { window: (r - 1) / 2, kind, action: Action::Matrix(matrix) })
    }

    /// `images[i]` is the image of mode `i - N`; must permute `[-N, N]`.
    pub fn permutation(images: Vec<i64>) -> Result<Self> {
        if images.len() % 2 == 0 {
            return Err(Error::InvalidMap(format!(
                "permutation table needs 2N+1 entries, got {}",
                images.len()
            )));
        }
        let window = (images.len() - 1) / 2;
        let w = window as i64;
        let mut seen = vec![false; images.len()];
        for &img in &images {
            if img < -w || img > w || std::mem::replace(&mut seen[(img + w) as usize], true) {
                return Err(Error::InvalidMap(format!(
                    "not a permutation of [-{w}, {w}]"
                )));
            }
        }
        Ok(FiniteUnitary { window, kind: MapKind::Permutation, action: Action::Permutation(images) })
    }

    pub fn injection(scale: i64, offset: i64) -> Result<Self> {
        if scale == 0 {
            return Err(Error::InvalidMap("injection scale must be nonzero".into()));
        }
        Ok(FiniteUnitary {
            window: 0,
            kind: MapKind::Injection,
            action: Action::Injection(Injection { scale, offset }),
        })
    }

    /// The shift `e_i ↦ e_{i+1}`.
    pub fn shift() -> Self {
        Self::injection(1, 1).expect("nonzero scale")
    }

    /// Real rotation by `theta` in the plane of modes `k0`, `k1`:
    /// `e_{k0} ↦ cos θ e_{k0} + sin θ e_{k1}`, `e_{k1} ↦ −sin θ e_{k0} + cos θ e_{k1}`.
    pub fn rotation(k0: i64, k1: i64, theta: f64) -> Result<Self> {
        let (c, s) = (theta.cos(), theta.sin());
        let block = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]).map(|v| Complex64::new(v, 0.0));
        Self::embed(&[k0, k1], &block)
    }

    /// Diagonal phase `e_k ↦ e^{iθ} e_k`.
    pub fn phase(k: i64, theta: f64) -> Self {
        let block = DMatrix::from_element(1, 1, Complex64::from_polar(1.0, theta));
        Self::embed(&[k], &block).expect("1x1 phase is unitary")
    }

    /// Embeds `block` acting on the listed modes into the smallest window
    /// containing them; identity elsewhere.
    pub fn embed(modes: &[i64], block: &DMatrix<Complex64>) -> Result<Self> {
        if block.nrows() != modes.len() || block.ncols() != modes.len() {
            return Err(Error::InvalidMap("block size does not match the mode list".into()));
        }
        let mut sorted = modes.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != modes.len() {
            return Err(Error::InvalidMap("repeated mode in block embedding".into()));
        }
        let window = modes.iter().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0);
        let mut m = identity_matrix(2 * window + 1);
        let w = window as i64;
        for (a, &i) in modes.iter().enumerate() {
            for (b, &j) in modes.iter().enumerate() {
                m[((i + w) as usize, (j + w) as usize)] = block[(a, b)];
            }
        }
        Self::from_matrix(m)
    }

    /// Haar-ish random real orthogonal on the window (QR of a Gaussian matrix).
    pub fn random_orthogonal<R: Rng + ?Sized>(window: usize, rng: &mut R) -> Self {
        let dim = 2 * window + 1;
        let g = DMatrix::<f64>::from_fn(dim, dim, |_, _| rng.sample(StandardNormal));
        let qr = g.qr();
        let (mut q, r) = (qr.q(), qr.r());
        for j in 0..dim {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        Self::real_orthogonal(q.map(|v| Complex64::new(v, 0.0)))
            .expect("QR factor is orthogonal")
    }

    pub fn random_unitary<R: Rng + ?Sized>(window: usize, rng: &mut R) -> Self {
        let dim = 2 * window + 1;
        let g = DMatrix::<Complex64>::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let qr = g.qr();
        let (mut q, r) = (qr.q(), qr.r());
        for j in 0..dim {
            let d = r[(j, j)];
            if d.norm() > 0.0 {
                let ph = d / d.norm();
                for i in 0..dim {
                    q[(i, j)] *= ph;
                }
            }
        }
        Self::unitary(q).expect("QR factor is unitary")
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn injection_map(&self) -> Option<Injection> {
        match self.action {
            Action::Injection(inj) => Some(inj),
            _ => None,
        }
    }

    /// Image of basis index `k` for permutation and injection kinds.
    pub fn index_image(&self, k: i64) -> Option<i64> {
        let w = self.window as i64;
        match &self.action {
            Action::Matrix(_) => None,
            Action::Injection(inj) => Some(inj.image(k)),
            Action::Permutation(table) => {
                Some(if k.abs() <= w { table[(k + w) as usize] } else { k })
            }
            Action::BlockSwap(n) => Some(g_n_image(*n, k)),
        }
    }

    /// Matrix entry `U_{i,j}` (coefficient of `e_i` in `U e_j`).
    pub fn entry(&self, i: i64, j: i64) -> Complex64 {
        let w = self.window as i64;
        match &self.action {
            Action::Matrix(m) if i.abs() <= w && j.abs() <= w => m[((i + w) as usize, (j + w) as usize)],
            Action::Matrix(_) => Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0),
            _ => {
                let img = self.index_image(j).expect("index map");
                Complex64::new(if img == i { 1.0 } else { 0.0 }, 0.0)
            }
        }
    }

    /// The `(2N+1)²` matrix on the window; `None` for injections.
    pub fn to_matrix(&self) -> Option<DMatrix<Complex64>> {
        match &self.action {
            Action::Matrix(m) => Some(m.clone()),
            Action::Injection(_) => None,
            _ => Some(self.materialize(self.window)),
        }
    }

    /// Matrix of this map on a (possibly larger) window `[-w, w]`.
    fn materialize(&self, window: usize) -> DMatrix<Complex64> {
        debug_assert!(window >= self.window);
        let dim = 2 * window + 1;
        let w = window as i64;
        let mut m = DMatrix::zeros(dim, dim);
        for j in -w..=w {
            let col = self.apply(&CVector::basis(j));
            for (&i, &c) in col.coeffs() {
                m[((i + w) as usize, (j + w) as usize)] = c;
            }
        }
        m
    }

    /// `self ∘ other`: apply `other` first. Matrix products are materialized
    /// on the union window.
    pub fn compose(&self, other: &FiniteUnitary) -> Result<FiniteUnitary> {
        use MapKind::*;
        match (self.kind, other.kind) {
            (Injection, Injection) => {
                let (a, b) = (self.injection_map().unwrap(), other.injection_map().unwrap());
                FiniteUnitary::injection(a.scale * b.scale, a.scale * b.offset + a.offset)
            }
            (Injection, _) | (_, Injection) => Err(Error::InvalidMap(
                "cannot compose an injection with a windowed map".into(),
            )),
            (Permutation, Permutation) => {
                let w = self.window.max(other.window) as i64;
                let table = (-w..=w)
                    .map(|k| self.index_image(other.index_image(k).unwrap()).unwrap())
                    .collect();
                FiniteUnitary::permutation(table)
            }
            _ => {
                let w = self.window.max(other.window);
                let m = self.materialize(w) * other.materialize(w);
                let real = matches!(self.kind, RealOrthogonal | Permutation)
                    && matches!(other.kind, RealOrthogonal | Permutation);
                if real {
                    FiniteUnitary::real_orthogonal(m.map(|z| Complex64::new(z.re, 0.0)))
                } else {
                    FiniteUnitary::unitary(m)
                }
            }
        }
    }

    /// `x ↦ U x`. Coefficients outside the window and the excess are unchanged.
    pub fn apply(&self, x: &CVector) -> CVector {
        let w = self.window as i64;
        let mut out: BTreeMap<i64, Complex64> = BTreeMap::new();
        let mut add = |k: i64, c: Complex64| {
            *out.entry(k).or_insert(Complex64::new(0.0, 0.0)) += c;
        };
        match &self.action {
            Action::Matrix(m) => {
                for (&j, &c) in &x.coeffs {
                    if j.abs() > w {
                        add(j, c);
                        continue;
                    }
                    let col = (j + w) as usize;
                    for i in -w..=w {
                        let u = m[((i + w) as usize, col)];
                        if u != Complex64::new(0.0, 0.0) {
                            add(i, u * c);
                        }
                    }
                }
            }
            _ => {
                for (&j, &c) in &x.coeffs {
                    add(self.index_image(j).expect("index map"), c);
                }
            }
        }
        let mut v = CVector { coeffs: out, excess: x.excess };
        v.prune();
        v
    }
}

/// Free-function form of [`FiniteUnitary::apply`].
pub fn apply_linear(u: &FiniteUnitary, x: &CVector) -> CVector {
    u.apply(x)
}

/// Closed form of the involution `g_n`: swaps the blocks `[0, 2^{n-1})` and
/// `[2^{n-1}, 2^n)`, and the blocks `[-2^{n-1}, -1]` and `[-2^n, -2^{n-1})`.
pub fn g_n_image(n: u32, k: i64) -> i64 {
    let h = 1i64 << (n - 1);
    let full = 1i64 << n;
    if (0..h).contains(&k) {
        k + h
    } else if (h..full).contains(&k) {
        k - h
    } else if k >= full {
        k
    } else if (-h..=-1).contains(&k) {
        k - h
    } else if (-full..-h).contains(&k) {
        k + h
    } else {
        k
    }
}

/// The permutation `g_n` as a map with window `2^n`.
///
/// # Panics
/// If `n` is 0 or larger than 62.
pub fn build_g_n(n: u32) -> FiniteUnitary {
    assert!((1..=62).contains(&n), "g_n is defined for 1 <= n <= 62");
    FiniteUnitary { window: 1usize << n, kind: MapKind::Permutation, action: Action::BlockSwap(n) }
}

fn identity_matrix(dim: usize) -> DMatrix<Complex64> {
    DMatrix::identity(dim, dim)
}

/// `max |(U*U − I)_{ij}|`.
pub fn unitarity_deviation(m: &DMatrix<Complex64>) -> f64 {
    let p = m.adjoint() * m;
    let dim = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((p[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

// JSON forms: vectors as {"coeffs": {"k": [re, im]}, "excess": r};
// maps as {"window": N, "matrix": [[[re, im], ...], ...], "kind": "..."}.

#[derive(Serialize, Deserialize)]
struct VectorRepr {
    coeffs: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    excess: f64,
}

impl Serialize for CVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        VectorRepr {
            coeffs: self.coeffs.iter().map(|(k, c)| (k.to_string(), [c.re, c.im])).collect(),
            excess: self.excess,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = VectorRepr::deserialize(d)?;
        if !(repr.excess.is_finite() && repr.excess >= 0.0) {
            return Err(D::Error::custom("excess must be a finite nonnegative number"));
        }
        let mut pairs = Vec::with_capacity(repr.coeffs.len());
        for (k, [re, im]) in repr.coeffs {
            let k: i64 = k.parse().map_err(|_| D::Error::custom(format!("bad mode index `{k}`")))?;
            pairs.push((k, Complex64::new(re, im)));
        }
        Ok(CVector::from_pairs(pairs).with_excess(repr.excess))
    }
}

#[derive(Serialize, Deserialize)]
struct MapRepr {
    window: usize,
    kind: MapKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    map: Option<Injection>,
}

impl Serialize for FiniteUnitary {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let matrix = self.to_matrix().map(|m| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect()
        });
        MapRepr { window: self.window, kind: self.kind, matrix, map: self.injection_map() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FiniteUnitary {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = MapRepr::deserialize(d)?;
        if repr.kind == MapKind::Injection {
            let inj = repr.map.ok_or_else(|| D::Error::custom("injection needs `map`"))?;
            return FiniteUnitary::injection(inj.scale, inj.offset).map_err(D::Error::custom);
        }
        let rows = repr.matrix.ok_or_else(|| D::Error::custom("missing `matrix`"))?;
        let dim = 2 * repr.window + 1;
        if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
            return Err(D::Error::custom(format!("matrix must be {dim}x{dim} for window {}", repr.window)));
        }
        let m = DMatrix::from_fn(dim, dim, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1]));
        match repr.kind {
            MapKind::Unitary => FiniteUnitary::unitary(m),
            MapKind::RealOrthogonal => FiniteUnitary::real_orthogonal(m),
            MapKind::Permutation => {
                let w = repr.window as i64;
                let mut table = Vec::with_capacity(dim);
                for j in 0..dim {
                    let hits: Vec<usize> = (0..dim).filter(|&i| m[(i, j)] != Complex64::new(0.0, 0.0)).collect();
                    match hits.as_slice() {
                        [i] if m[(*i, j)] == Complex64::new(1.0, 0.0) => table.push(*i as i64 - w),
                        _ => return Err(D::Error::custom("permutation matrix must have one unit entry per column")),
                    }
                }
                FiniteUnitary::permutation(table)
            }
            MapKind::Injection => unreachable!(),
        }
        .map_err(D::Error::custom)
    }
}

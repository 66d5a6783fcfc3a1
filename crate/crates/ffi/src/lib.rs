//! C ABI over `weyl_lab`.
//!
//! Objects live behind opaque handles created by `*_parse` / `*_new`
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`WlStatus`]; on failure the message is available from
//! [`wl_last_error`] on the same thread. Strings returned through `char**`
//! must be released with [`wl_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use weyl_lab::dsl::{lower_map, parse_map, parse_polynomial, parse_state};
use weyl_lab::fock::FockContext;
use weyl_lab::hilbert::{CVector, FiniteUnitary};
use weyl_lab::positivity::{scan_min_eigenvalue, search_violation};
use weyl_lab::states::{clustering_deviation, evaluate, regularity_jump, StateFunctional, DEFAULT_T_MIN};
use weyl_lab::tomography::{invert_mixture, s2_grid};
use weyl_lab::weyl::{adjoint, automorphism_image, word_mul, WeylPolynomial};
use weyl_lab::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Syntax or arity error in an expression.
    Parse = 3,
    /// Argument outside the domain of the operation.
    Domain = 4,
    /// A numerical check failed (non-unitary, non-Hermitian, ...).
    Numeric = 5,
    Io = 6,
    Panic = 7,
}

pub struct WlState(StateFunctional);
pub struct WlPolynomial(WeylPolynomial);
pub struct WlMap(FiniteUnitary);
pub struct WlFock(FockContext);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> WlStatus {
    match e {
        Error::Syntax { .. } | Error::Arity { .. } => WlStatus::Parse,
        Error::NotHermitian { .. } | Error::NotUnitary { .. } | Error::Contraction { .. } => WlStatus::Numeric,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => WlStatus::Io,
        _ => WlStatus::Domain,
    }
}

struct Fail(WlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(WlStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> WlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WlStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            WlStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(WlStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_handle<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    put(out, Box::into_raw(Box::new(value)), "output handle")
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    let c = CString::new(s).map_err(|_| Fail(WlStatus::Domain, "string has an interior nul".into()))?;
    put(out, c.into_raw(), "output string")
}

/// Builds a vector from `n` parallel arrays of modes and coefficients.
unsafe fn vector(modes: *const i64, re: *const f64, im: *const f64, n: usize) -> Result<CVector, Fail> {
    if n == 0 {
        return Ok(CVector::zero());
    }
    if modes.is_null() || re.is_null() || im.is_null() {
        return Err(null("vector array"));
    }
    let (modes, re, im) =
        (std::slice::from_raw_parts(modes, n), std::slice::from_raw_parts(re, n), std::slice::from_raw_parts(im, n));
    Ok(CVector::from_pairs((0..n).map(|i| (modes[i], Complex64::new(re[i], im[i])))))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn wl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn wl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------- states

/// # Safety
/// `src` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wl_state_parse(src: *const c_char, out: *mut *mut WlState) -> WlStatus {
    guard(|| put_handle(out, WlState(parse_state(text(src, "source")?)?)))
}

/// # Safety
/// `s` must be null or a handle from [`wl_state_parse`], freed once.
#[no_mangle]
pub unsafe extern "C" fn wl_state_free(s: *mut WlState) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// `ω(W(x))` for `x = Σ (re_k + i im_k) e_{modes_k}`.
///
/// # Safety
/// Arrays must hold `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wl_characteristic(
    s: *const WlState,
    modes: *const i64,
    re: *const f64,
    im: *const f64,
    n: usize,
    out: *mut f64,
) -> WlStatus {
    guard(|| {
        let s = borrow(s, "state")?;
        put(out, s.0.characteristic(&vector(modes, re, im, n)?)?, "out")
    })
}

/// # Safety
/// Handles must be valid; `re` and `im` writable.
#[no_mangle]
pub unsafe extern "C" fn wl_evaluate(
    s: *const WlState,
    a: *const WlPolynomial,
    re: *mut f64,
    im: *mut f64,
) -> WlStatus {
    guard(|| {
        let v = evaluate(&borrow(s, "state")?.0, &borrow(a, "polynomial")?.0)?;
        put(re, v.re, "re")?;
        put(im, v.im, "im")
    })
}

/// Seeded search for a negative moment-matrix eigenvalue. Sets `found` to 1
/// with the witness eigenvalue, or 0 with the smallest eigenvalue seen.
///
/// # Safety
/// `s` must be valid; `found` and `min_eig` writable.
#[no_mangle]
pub unsafe extern "C" fn wl_search_violation(
    s: *const WlState,
    n_points: usize,
    trials: usize,
    seed: u64,
    found: *mut i32,
    min_eig: *mut f64,
) -> WlStatus {
    guard(|| {
        let s = &borrow(s, "state")?.0;
        let (f, m) = match search_violation(s, n_points, trials, seed)? {
            Some(w) => (1, w.min_eig),
            None => (0, scan_min_eigenvalue(s, n_points, trials, seed)?),
        };
        put(found, f, "found")?;
        put(min_eig, m, "min_eig")
    })
}

/// # Safety
/// Handles must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wl_clustering_deviation(
    s: *const WlState,
    a: *const WlPolynomial,
    b: *const WlPolynomial,
    n: u32,
    out: *mut f64,
) -> WlStatus {
    guard(|| {
        if !(1..=62).contains(&n) {
            return Err(Fail(WlStatus::Domain, format!("n must be in [1, 62], got {n}")));
        }
        let d = clustering_deviation(&borrow(s, "state")?.0, &borrow(a, "a")?.0, &borrow(b, "b")?.0, n)?;
        put(out, d, "out")
    })
}

/// # Safety
/// Arrays must hold `n` elements; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wl_regularity_jump(
    s: *const WlState,
    modes: *const i64,
    re: *const f64,
    im: *const f64,
    n: usize,
    out: *mut f64,
) -> WlStatus {
    guard(|| {
        let j = regularity_jump(&borrow(s, "state")?.0, &vector(modes, re, im, n)?, DEFAULT_T_MIN)?;
        put(out, j, "out")
    })
}

// ---------------------------------------------------------------- polynomials

/// # Safety
/// `src` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wl_polynomial_parse(src: *const c_char, out: *mut *mut WlPolynomial) -> WlStatus {
    guard(|| put_handle(out, WlPolynomial(parse_polynomial(text(src, "source")?)?)))
}

/// # Safety
/// `p` must be null or a polynomial handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn wl_polynomial_free(p: *mut WlPolynomial) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// Handles must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wl_polynomial_mul(
    a: *const WlPolynomial,
    b: *const WlPolynomial,
    out: *mut *mut WlPolynomial,
) -> WlStatus {
    guard(|| put_handle(out, WlPolynomial(word_mul(&borrow(a, "a")?.0, &borrow(b, "b")?.0)?)))
}

/// # Safety
/// `a` must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wl_polynomial_adjoint(a: *const WlPolynomial, out: *mut *mut WlPolynomial) -> WlStatus {
    guard(|| put_handle(out, WlPolynomial(adjoint(&borrow(a, "a")?.0))))
}

/// # Safety
/// Handles must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wl_polynomial_apply(
    u: *const WlMap,
    a: *const WlPolynomial,
    out: *mut *mut WlPolynomial,
) -> WlStatus {
    guard(|| put_handle(out, WlPolynomial(automorphism_image(&borrow(u, "map")?.0, &borrow(a, "a")?.0))))
}

/// Number of terms, or 0 for a null handle.
///
/// # Safety
/// `a` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn wl_polynomial_num_terms(a: *const WlPolynomial) -> usize {
    a.as_ref().map_or(0, |p| p.0.terms().len())
}

/// JSON form `[{"coeff":[re,im],"vector":{...}}, ...]`.
///
/// # Safety
/// `a` must be valid; free the result with [`wl_string_free`].
#[no_mangle]
pub unsafe extern "C" fn wl_polynomial_to_json(a: *const WlPolynomial, out: *mut *mut c_char) -> WlStatus {
    guard(|| {
        let s = serde_json::to_string(&borrow(a, "a")?.0).map_err(Error::from)?;
        put_string(out, s)
    })
}

// ---------------------------------------------------------------- maps

/// # Safety
/// `src` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wl_map_parse(src: *const c_char, out: *mut *mut WlMap) -> WlStatus {
    guard(|| put_handle(out, WlMap(lower_map(&parse_map(text(src, "source")?)?)?)))
}

/// # Safety
/// `u` must be null or a map handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn wl_map_free(u: *mut WlMap) {
    if !u.is_null() {
        drop(Box::from_raw(u));
    }
}

// ---------------------------------------------------------------- Fock space

/// Fock space over modes `0..modes` with occupations up to `cutoff`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wl_fock_new(modes: usize, cutoff: usize, out: *mut *mut WlFock) -> WlStatus {
    guard(|| {
        let ids: Vec<i64> = (0..modes as i64).collect();
        put_handle(out, WlFock(FockContext::new(&ids, cutoff)?))
    })
}

/// # Safety
/// `f` must be null or a Fock handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn wl_fock_free(f: *mut WlFock) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// # Safety
/// `f` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn wl_fock_dim(f: *const WlFock) -> usize {
    f.as_ref().map_or(0, |f| f.0.dim())
}

/// `Tr(T W(x))` for the thermal density of variance `s2`.
///
/// # Safety
/// Arrays must hold `n` elements; `re` and `im` writable.
#[no_mangle]
pub unsafe extern "C" fn wl_fock_thermal_characteristic(
    f: *const WlFock,
    s2: f64,
    modes: *const i64,
    x_re: *const f64,
    x_im: *const f64,
    n: usize,
    re: *mut f64,
    im: *mut f64,
) -> WlStatus {
    guard(|| {
        let ctx = &borrow(f, "fock")?.0;
        let rho = ctx.thermal_density(s2)?;
        let w = WeylPolynomial::generator(vector(modes, x_re, x_im, n)?);
        let v = ctx.state_expectation(&rho, &w)?;
        put(re, v.re, "re")?;
        put(im, v.im, "im")
    })
}

// ---------------------------------------------------------------- tomography

/// Recovers a mixing measure from `n` samples `(ts[i], values[i])` on the
/// grid `grid_a, grid_a + step, …, grid_b`. Writes the measure as JSON.
///
/// # Safety
/// Arrays must hold `n` elements; free the result with [`wl_string_free`].
#[no_mangle]
pub unsafe extern "C" fn wl_invert_mixture(
    ts: *const f64,
    values: *const f64,
    n: usize,
    x_norm: f64,
    grid_a: f64,
    grid_b: f64,
    step: f64,
    reg: f64,
    out: *mut *mut c_char,
) -> WlStatus {
    guard(|| {
        if n > 0 && (ts.is_null() || values.is_null()) {
            return Err(null("sample array"));
        }
        let samples: Vec<(f64, f64)> = if n == 0 {
            Vec::new()
        } else {
            let (t, v) = (std::slice::from_raw_parts(ts, n), std::slice::from_raw_parts(values, n));
            t.iter().copied().zip(v.iter().copied()).collect()
        };
        let mu = invert_mixture(&samples, x_norm, &s2_grid(grid_a, grid_b, step)?, reg)?;
        let s = serde_json::to_string(&serde_json::to_value(&mu).map_err(Error::from)?).map_err(Error::from)?;
        put_string(out, s)
    })
}

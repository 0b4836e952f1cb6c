//! C interface to the semi-static hedging library.
//!
//! Objects are passed as opaque handles created by `sh_*_new`/`sh_*_compute`
//! style functions and released with the matching `sh_*_free`. Every fallible
//! call returns an [`ShStatus`]; the message of the most recent failure on the
//! calling thread is available from [`sh_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use semistatic_hedge::claims::{ClaimSet, ClaimSpec};
use semistatic_hedge::fourier::{compute_moments, option_price, MomentData, QuadratureConfig};
use semistatic_hedge::heston::{char_exponents, swap_rate, HestonParams, C64};
use semistatic_hedge::selection::{brute_force, greedy_forward, leaps_and_bounds, LeapsOptions, DEFAULT_BUDGET};
use semistatic_hedge::solver::{hedging_error, solve_constrained, solve_unconstrained, Constraints};
use semistatic_hedge::HedgeError;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidParams = 3,
    InvalidClaim = 4,
    DomainViolation = 5,
    QuadratureFailure = 6,
    NumericalFailure = 7,
    BudgetExceeded = 8,
    BufferTooSmall = 9,
    Io = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShMethod {
    LeapsAndBounds = 0,
    BruteForce = 1,
    GreedyForward = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShOptionKind {
    Call = 0,
    Put = 1,
}

/// Quadrature settings for [`sh_moments_compute`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShQuadrature {
    pub time_nodes: usize,
    pub strip_tol: f64,
    pub entry_tol: f64,
    pub c_y_max: f64,
    pub c_panel_order: usize,
    pub max_evals: usize,
}

impl From<ShQuadrature> for QuadratureConfig {
    fn from(q: ShQuadrature) -> Self {
        QuadratureConfig {
            time_nodes: q.time_nodes,
            strip_tol: q.strip_tol,
            entry_tol: q.entry_tol,
            c_y_max: q.c_y_max,
            c_panel_order: q.c_panel_order,
            max_evals: q.max_evals,
        }
    }
}

impl From<QuadratureConfig> for ShQuadrature {
    fn from(q: QuadratureConfig) -> Self {
        ShQuadrature {
            time_nodes: q.time_nodes,
            strip_tol: q.strip_tol,
            entry_tol: q.entry_tol,
            c_y_max: q.c_y_max,
            c_panel_order: q.c_panel_order,
            max_evals: q.max_evals,
        }
    }
}

/// Characteristic exponents and their `w` derivatives.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ShCharExponents {
    pub phi_re: f64,
    pub phi_im: f64,
    pub psi_re: f64,
    pub psi_im: f64,
    pub dphi_dw_re: f64,
    pub dphi_dw_im: f64,
    pub dpsi_dw_re: f64,
    pub dpsi_dw_im: f64,
}

/// Heston parameters.
pub struct ShParams {
    inner: HestonParams,
}

/// Target claim plus supplementary options.
pub struct ShClaims {
    inner: ClaimSet,
}

/// Moments `A`, `B`, `C` of a claim set.
pub struct ShMoments {
    inner: MomentData,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &HedgeError) -> ShStatus {
    match e {
        HedgeError::InvalidParams(_) => ShStatus::InvalidParams,
        HedgeError::InvalidClaim(_) | HedgeError::PoleError(_) => ShStatus::InvalidClaim,
        HedgeError::DomainViolation(_) | HedgeError::NoValidStrip(_) => ShStatus::DomainViolation,
        HedgeError::QuadratureFailure(_) | HedgeError::ImaginaryResidue(_) => ShStatus::QuadratureFailure,
        HedgeError::BudgetExceeded { .. } => ShStatus::BudgetExceeded,
        HedgeError::Io(_) => ShStatus::Io,
        HedgeError::Config(_) | HedgeError::Dimension(_) => ShStatus::InvalidArgument,
        _ => ShStatus::NumericalFailure,
    }
}

/// Runs `f`, recording errors and containing panics.
fn guard(f: impl FnOnce() -> Result<(), (ShStatus, String)>) -> ShStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ShStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            ShStatus::Panic
        }
    }
}

fn lib_err(e: HedgeError) -> (ShStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (ShStatus, String) {
    (ShStatus::NullPointer, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, (ShStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn c_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (ShStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| (ShStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_slice<'a>(buf: *mut f64, len: usize, need: usize) -> Result<&'a mut [f64], (ShStatus, String)> {
    if buf.is_null() {
        return Err(null("output buffer"));
    }
    if len < need {
        return Err((ShStatus::BufferTooSmall, format!("buffer holds {len}, need {need}")));
    }
    Ok(std::slice::from_raw_parts_mut(buf, need))
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<(), (ShStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = v;
    Ok(())
}

unsafe fn put_handle<T>(out: *mut *mut T, v: T) -> Result<(), (ShStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

/// Message of the last failed call on this thread; empty if none. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sh_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sh_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Validated parameters from individual values.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sh_params_new(
    kappa: f64,
    lambda: f64,
    rho: f64,
    sigma: f64,
    v0: f64,
    s0: f64,
    maturity: f64,
    out: *mut *mut ShParams,
) -> ShStatus {
    guard(|| {
        let p = HestonParams::new(kappa, lambda, rho, sigma, v0, s0, maturity).map_err(lib_err)?;
        put_handle(out, ShParams { inner: p })
    })
}

/// The stylized parameter set used in the examples.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sh_params_stylized(out: *mut *mut ShParams) -> ShStatus {
    guard(|| put_handle(out, ShParams { inner: HestonParams::stylized() }))
}

/// Parameters from a JSON object.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sh_params_from_json(json: *const c_char, out: *mut *mut ShParams) -> ShStatus {
    guard(|| {
        let p = HestonParams::from_json_str(c_str(json, "json")?).map_err(lib_err)?;
        put_handle(out, ShParams { inner: p })
    })
}

/// # Safety
/// `p` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sh_params_free(p: *mut ShParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Fair variance swap strike.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sh_swap_rate(params: *const ShParams, out: *mut f64) -> ShStatus {
    guard(|| write(out, swap_rate(&borrow(params, "params")?.inner)))
}

/// `phi_t(u, w)`, `psi_t(u, w)` and their `w` derivatives.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sh_char_exponents(
    params: *const ShParams,
    t: f64,
    u_re: f64,
    u_im: f64,
    w_re: f64,
    w_im: f64,
    out: *mut ShCharExponents,
) -> ShStatus {
    guard(|| {
        let p = &borrow(params, "params")?.inner;
        let c = char_exponents(t, C64::new(u_re, u_im), C64::new(w_re, w_im), p).map_err(lib_err)?;
        write(
            out,
            ShCharExponents {
                phi_re: c.phi.re,
                phi_im: c.phi.im,
                psi_re: c.psi.re,
                psi_im: c.psi.im,
                dphi_dw_re: c.dphi_dw.re,
                dphi_dw_im: c.dphi_dw.im,
                dpsi_dw_re: c.dpsi_dw.re,
                dpsi_dw_im: c.dpsi_dw.im,
            },
        )
    })
}

/// Price of a European option by Fourier inversion.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sh_option_price(params: *const ShParams, kind: ShOptionKind, strike: f64, out: *mut f64) -> ShStatus {
    guard(|| {
        let p = &borrow(params, "params")?.inner;
        let spec = match kind {
            ShOptionKind::Call => ClaimSpec::call(strike),
            ShOptionKind::Put => ClaimSpec::put(strike),
        };
        let set = ClaimSet::new(ClaimSpec::variance_swap(None), vec![spec], p).map_err(lib_err)?;
        write(out, option_price(p, &set.options[0], 1e-10).map_err(lib_err)?)
    })
}

/// Out-of-the-money options on `k_min, k_min + dk, ..., k_max`: puts below
/// spot, calls at and above.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sh_claims_otm_grid(
    params: *const ShParams,
    k_min: f64,
    k_max: f64,
    dk: f64,
    out: *mut *mut ShClaims,
) -> ShStatus {
    guard(|| {
        if !(dk > 0.0 && k_min > 0.0 && k_max >= k_min) {
            return Err((ShStatus::InvalidArgument, "need 0 < k_min <= k_max and dk > 0".into()));
        }
        let c = ClaimSet::otm_grid(&borrow(params, "params")?.inner, k_min, k_max, dk).map_err(lib_err)?;
        put_handle(out, ShClaims { inner: c })
    })
}

/// Claim set from JSON (`{"target": ..., "options": [...]}`).
///
/// # Safety
/// `json` must be NUL-terminated; pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sh_claims_from_json(params: *const ShParams, json: *const c_char, out: *mut *mut ShClaims) -> ShStatus {
    guard(|| {
        let p = &borrow(params, "params")?.inner;
        let c = ClaimSet::from_json_str(c_str(json, "json")?, p).map_err(lib_err)?;
        put_handle(out, ShClaims { inner: c })
    })
}

/// Number of supplementary options; 0 for a null handle.
///
/// # Safety
/// `claims` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn sh_claims_len(claims: *const ShClaims) -> usize {
    claims.as_ref().map_or(0, |c| c.inner.len())
}

/// # Safety
/// `c` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sh_claims_free(c: *mut ShClaims) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

#[no_mangle]
pub extern "C" fn sh_quadrature_default() -> ShQuadrature {
    QuadratureConfig::default().into()
}

#[no_mangle]
pub extern "C" fn sh_quadrature_coarse() -> ShQuadrature {
    QuadratureConfig::coarse().into()
}

/// Computes `A`, `B`, `C`; `quad` may be null for the default settings.
///
/// # Safety
/// Pointers must be valid (`quad` may be null).
#[no_mangle]
pub unsafe extern "C" fn sh_moments_compute(
    params: *const ShParams,
    claims: *const ShClaims,
    quad: *const ShQuadrature,
    out: *mut *mut ShMoments,
) -> ShStatus {
    guard(|| {
        let p = &borrow(params, "params")?.inner;
        let c = &borrow(claims, "claims")?.inner;
        let q = quad.as_ref().map_or_else(QuadratureConfig::default, |q| (*q).into());
        let m = compute_moments(p, c, &q).map_err(lib_err)?;
        put_handle(out, ShMoments { inner: m })
    })
}

/// Moments from their JSON serialization.
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sh_moments_from_json(json: *const c_char, out: *mut *mut ShMoments) -> ShStatus {
    guard(|| {
        let m = MomentData::from_json(c_str(json, "json")?).map_err(lib_err)?;
        put_handle(out, ShMoments { inner: m })
    })
}

/// JSON serialization; release the string with [`sh_string_free`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sh_moments_to_json(m: *const ShMoments, out: *mut *mut c_char) -> ShStatus {
    guard(|| {
        let s = borrow(m, "moments")?.inner.to_json().map_err(lib_err)?;
        let c = CString::new(s).map_err(|_| (ShStatus::NumericalFailure, "embedded NUL".into()))?;
        write(out, c.into_raw())
    })
}

/// # Safety
/// `m` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sh_moments_free(m: *mut ShMoments) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of options; 0 for a null handle.
///
/// # Safety
/// `m` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn sh_moments_dim(m: *const ShMoments) -> usize {
    m.as_ref().map_or(0, |m| m.inner.n())
}

/// `A`, the swap rate `k*` and the reciprocal condition number of `C`.
///
/// # Safety
/// Pointers must be valid; any output pointer may be null to skip it.
#[no_mangle]
pub unsafe extern "C" fn sh_moments_scalars(m: *const ShMoments, a: *mut f64, k_star: *mut f64, rcond: *mut f64) -> ShStatus {
    guard(|| {
        let m = &borrow(m, "moments")?.inner;
        if !a.is_null() {
            *a = m.a;
        }
        if !k_star.is_null() {
            *k_star = m.k_star;
        }
        if !rcond.is_null() {
            *rcond = m.rcond();
        }
        Ok(())
    })
}

/// Copies `B` into `buf` (length at least `n`).
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sh_moments_b(m: *const ShMoments, buf: *mut f64, len: usize) -> ShStatus {
    guard(|| {
        let m = &borrow(m, "moments")?.inner;
        out_slice(buf, len, m.n())?.copy_from_slice(&m.b);
        Ok(())
    })
}

/// Copies `C` row-major into `buf` (length at least `n * n`).
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sh_moments_c(m: *const ShMoments, buf: *mut f64, len: usize) -> ShStatus {
    guard(|| {
        let m = &borrow(m, "moments")?.inner;
        let n = m.n();
        let dst = out_slice(buf, len, n * n)?;
        for (i, row) in m.c.iter().enumerate() {
            dst[i * n..(i + 1) * n].copy_from_slice(row);
        }
        Ok(())
    })
}

/// `A - 2 v'B + v'Cv` for weights `v` of length `n`.
///
/// # Safety
/// `v` must hold `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sh_hedging_error(m: *const ShMoments, v: *const f64, len: usize, out: *mut f64) -> ShStatus {
    guard(|| {
        let m = &borrow(m, "moments")?.inner;
        if v.is_null() {
            return Err(null("v"));
        }
        if len != m.n() {
            return Err((ShStatus::InvalidArgument, format!("v has {len} entries, expected {}", m.n())));
        }
        write(out, hedging_error(std::slice::from_raw_parts(v, len), m))
    })
}

/// Optimal weights on all options, optionally restricted to `v >= 0`.
/// Writes `n` weights to `v_out` and the squared error to `eps2`.
///
/// # Safety
/// `v_out` must hold `len` doubles; `eps2` may be null.
#[no_mangle]
pub unsafe extern "C" fn sh_solve(m: *const ShMoments, nonneg: bool, v_out: *mut f64, len: usize, eps2: *mut f64) -> ShStatus {
    guard(|| {
        let m = &borrow(m, "moments")?.inner;
        let s = if nonneg { solve_constrained(m, &Constraints::NonNegative).map_err(lib_err)? } else { solve_unconstrained(m) };
        out_slice(v_out, len, m.n())?.copy_from_slice(&s.v);
        if !eps2.is_null() {
            *eps2 = s.eps2;
        }
        Ok(())
    })
}

/// Best portfolio with at most `d` options by the given method.
///
/// # Safety
/// `v_out` must hold `len` doubles; `eps2` may be null.
#[no_mangle]
pub unsafe extern "C" fn sh_select(
    m: *const ShMoments,
    method: ShMethod,
    d: usize,
    nonneg: bool,
    v_out: *mut f64,
    len: usize,
    eps2: *mut f64,
) -> ShStatus {
    guard(|| {
        let m = &borrow(m, "moments")?.inner;
        let (v, e) = match method {
            ShMethod::LeapsAndBounds => {
                let s = leaps_and_bounds(m, d, nonneg, LeapsOptions::default()).map_err(lib_err)?;
                (s.solution.v, s.solution.eps2)
            }
            ShMethod::BruteForce => {
                let s = brute_force(m, d, nonneg, DEFAULT_BUDGET).map_err(lib_err)?;
                (s.solution.v, s.solution.eps2)
            }
            ShMethod::GreedyForward => {
                let path = greedy_forward(m, d, nonneg).map_err(lib_err)?;
                let e = path.entries.last().ok_or((ShStatus::NumericalFailure, "empty path".to_string()))?;
                (e.v.clone(), e.eps2)
            }
        };
        out_slice(v_out, len, m.n())?.copy_from_slice(&v);
        if !eps2.is_null() {
            *eps2 = e;
        }
        Ok(())
    })
}

//! C interface to `mwi-core`.
//!
//! Measures and couplings are opaque handles created and released through
//! this API. Every fallible function returns an [`MwiStatus`] and writes its
//! results through out-pointers; a message for the last failure on the
//! calling thread is available from [`mwi_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mwi_core::constants::k_rho;
use mwi_core::convex_order::check_cx;
use mwi_core::itm::{itm_coupling, QChoice};
use mwi_core::measures::{DiscreteMeasureND, NormSpec};
use mwi_core::mot::m_rho_lp;
use mwi_core::transport::{wasserstein, Coupling};
use mwi_core::verify::{verify_pair, CaseTag};
use mwi_core::Error;

/// Opaque finitely supported probability measure on `R^d`.
pub struct MwiMeasure {
    inner: DiscreteMeasureND,
}

/// Opaque coupling between two measures.
pub struct MwiCoupling {
    inner: Coupling,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MwiStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    InvalidMeasure = 3,
    DimensionMismatch = 4,
    NotInConvexOrder = 5,
    EqualMeasures = 6,
    Degenerate = 7,
    LinearProgram = 8,
    Internal = 9,
    Panic = 10,
}

/// Selects the coupling of the positive and negative parts used by the
/// inverse-transform construction.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MwiQChoice {
    Comonotone = 0,
    ConditionedProduct = 1,
}

/// Family of a pair, which selects the constant in [`mwi_verify_pair`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MwiCase {
    OneD = 0,
    /// Uses the `lambda` argument.
    Scaling = 1,
    Tensor = 2,
    Radial = 3,
    Direction = 4,
    Generic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MwiConstants {
    pub rho: f64,
    pub f_sup: f64,
    pub x_star: f64,
    pub k_est: f64,
    pub k_lower: f64,
    pub k_upper: f64,
    pub gamma1_star: f64,
    pub gamma2_star: f64,
}

/// Absent optional values are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MwiReport {
    pub rho: f64,
    pub w_rho: f64,
    pub sigma_rho: f64,
    pub m_rho: f64,
    pub itm_cost: f64,
    pub ratio: f64,
    pub bound: f64,
    pub slack: f64,
    pub surrogate: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> MwiStatus {
    match e {
        Error::Domain(_) | Error::Config(_) | Error::Parse(_) => MwiStatus::Domain,
        Error::InvalidMeasure(_) => MwiStatus::InvalidMeasure,
        Error::DimensionMismatch { .. } => MwiStatus::DimensionMismatch,
        Error::NotInConvexOrder(_) => MwiStatus::NotInConvexOrder,
        Error::EqualMeasures => MwiStatus::EqualMeasures,
        Error::DegenerateSupport(_) | Error::MarginalMismatch(_) | Error::ConditionalMeanViolation(_) => {
            MwiStatus::Degenerate
        }
        Error::Lp(_) => MwiStatus::LinearProgram,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => MwiStatus::Internal,
    }
}

/// Runs `f`, turning errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), MwiStatus>>(f: F) -> MwiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MwiStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside mwi".into());
            MwiStatus::Panic
        }
    }
}

fn fail(e: Error) -> MwiStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> MwiStatus {
    set_error(format!("{what} is null"));
    MwiStatus::NullPointer
}

fn norm_of(r: f64) -> Result<NormSpec, MwiStatus> {
    NormSpec::new(r).map_err(fail)
}

unsafe fn measure<'a>(p: *const MwiMeasure, what: &str) -> Result<&'a DiscreteMeasureND, MwiStatus> {
    // SAFETY: the caller passes null or a live handle from `mwi_measure_new`.
    unsafe { p.as_ref() }.map(|m| &m.inner).ok_or_else(|| null(what))
}

/// Builds a measure from `n` points stored row-major in `points`
/// (`n * dim` values) and `n` weights summing to one.
///
/// # Safety
/// `points` and `weights` must be valid for reads of `n * dim` and `n`
/// doubles; `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn mwi_measure_new(
    dim: usize,
    n: usize,
    points: *const f64,
    weights: *const f64,
    out: *mut *mut MwiMeasure,
) -> MwiStatus {
    guard(|| {
        if points.is_null() || weights.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let len = n.checked_mul(dim).ok_or_else(|| fail(Error::Domain("size overflow".into())))?;
        // SAFETY: lengths are guaranteed by the caller.
        let (p, w) = unsafe { (std::slice::from_raw_parts(points, len), std::slice::from_raw_parts(weights, n)) };
        let pts = if dim == 0 { Vec::new() } else { p.chunks(dim).map(<[f64]>::to_vec).collect() };
        let m = DiscreteMeasureND::new(dim, pts, w.to_vec()).map_err(fail)?;
        // SAFETY: `out` is non-null and writable.
        unsafe { *out = Box::into_raw(Box::new(MwiMeasure { inner: m })) };
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle from `mwi_measure_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mwi_measure_free(m: *mut MwiMeasure) {
    if !m.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(m) });
    }
}

/// Number of distinct atoms (after merging), or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live measure handle.
#[no_mangle]
pub unsafe extern "C" fn mwi_measure_len(m: *const MwiMeasure) -> usize {
    unsafe { m.as_ref() }.map_or(0, |m| m.inner.len())
}

/// # Safety
/// `m` must be null or a live measure handle.
#[no_mangle]
pub unsafe extern "C" fn mwi_measure_dim(m: *const MwiMeasure) -> usize {
    unsafe { m.as_ref() }.map_or(0, |m| m.inner.dim())
}

/// `W_rho` for the `L^norm_r` norm (`INFINITY` selects the sup norm).
///
/// # Safety
/// `mu`, `nu` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mwi_wasserstein(
    mu: *const MwiMeasure,
    nu: *const MwiMeasure,
    rho: f64,
    norm_r: f64,
    out: *mut f64,
) -> MwiStatus {
    guard(|| {
        let (a, b) = unsafe { (measure(mu, "mu")?, measure(nu, "nu")?) };
        if out.is_null() {
            return Err(null("out"));
        }
        let v = wasserstein(a, b, rho, &norm_of(norm_r)?).map_err(fail)?;
        unsafe { *out = v };
        Ok(())
    })
}

/// `M_rho`; when `coupling` is non-null an optimal coupling handle is stored there.
///
/// # Safety
/// `mu`, `nu` must be live handles, `out` writable, `coupling` null or writable.
#[no_mangle]
pub unsafe extern "C" fn mwi_martingale_cost(
    mu: *const MwiMeasure,
    nu: *const MwiMeasure,
    rho: f64,
    norm_r: f64,
    out: *mut f64,
    coupling: *mut *mut MwiCoupling,
) -> MwiStatus {
    guard(|| {
        let (a, b) = unsafe { (measure(mu, "mu")?, measure(nu, "nu")?) };
        if out.is_null() {
            return Err(null("out"));
        }
        let (v, c) = m_rho_lp(a, b, rho, &norm_of(norm_r)?).map_err(fail)?;
        unsafe { *out = v };
        if !coupling.is_null() {
            unsafe { *coupling = Box::into_raw(Box::new(MwiCoupling { inner: c })) };
        }
        Ok(())
    })
}

/// Cost `sum m_ij |x_i - y_j|^rho` of the inverse-transform martingale
/// coupling of two measures on the line.
///
/// # Safety
/// `mu`, `nu` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mwi_itm_cost(
    mu: *const MwiMeasure,
    nu: *const MwiMeasure,
    rho: f64,
    q: MwiQChoice,
    out: *mut f64,
) -> MwiStatus {
    guard(|| {
        let (a, b) = unsafe { (measure(mu, "mu")?, measure(nu, "nu")?) };
        if out.is_null() {
            return Err(null("out"));
        }
        let choice = match q {
            MwiQChoice::Comonotone => QChoice::Comonotone,
            MwiQChoice::ConditionedProduct => QChoice::ConditionedProduct,
        };
        if !(rho >= 1.0 && rho.is_finite()) {
            return Err(fail(Error::Domain(format!("rho must be a finite real >= 1, got {rho}"))));
        }
        let (a, b) = (a.to_1d().map_err(fail)?, b.to_1d().map_err(fail)?);
        let c = itm_coupling(&a, &b, choice).map_err(fail)?;
        unsafe { *out = c.cost(rho, &NormSpec::euclidean()) };
        Ok(())
    })
}

/// # Safety
/// `c` must be null or a live coupling handle.
#[no_mangle]
pub unsafe extern "C" fn mwi_coupling_rows(c: *const MwiCoupling) -> usize {
    unsafe { c.as_ref() }.map_or(0, |c| c.inner.n_rows())
}

/// # Safety
/// `c` must be null or a live coupling handle.
#[no_mangle]
pub unsafe extern "C" fn mwi_coupling_cols(c: *const MwiCoupling) -> usize {
    unsafe { c.as_ref() }.map_or(0, |c| c.inner.n_cols())
}

/// Copies the `rows * cols` weights, row-major, into `out`.
///
/// # Safety
/// `c` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn mwi_coupling_weights(c: *const MwiCoupling, out: *mut f64, len: usize) -> MwiStatus {
    guard(|| {
        let c = unsafe { c.as_ref() }.ok_or_else(|| null("coupling"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let m = c.inner.matrix();
        if len < m.len() {
            return Err(fail(Error::Domain(format!("buffer holds {len} values, need {}", m.len()))));
        }
        unsafe { ptr::copy_nonoverlapping(m.as_ptr(), out, m.len()) };
        Ok(())
    })
}

/// # Safety
/// `c` must be null or a coupling handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mwi_coupling_free(c: *mut MwiCoupling) {
    if !c.is_null() {
        drop(unsafe { Box::from_raw(c) });
    }
}

/// `sigma_rho` and a minimising centre (`dim` values written to `center`, which may be null).
///
/// # Safety
/// `m` must be a live handle, `sigma` writable, `center` null or valid for `dim` writes.
#[no_mangle]
pub unsafe extern "C" fn mwi_centred_moment(
    m: *const MwiMeasure,
    rho: f64,
    norm_r: f64,
    sigma: *mut f64,
    center: *mut f64,
) -> MwiStatus {
    guard(|| {
        let m = unsafe { measure(m, "measure")? };
        if sigma.is_null() {
            return Err(null("sigma"));
        }
        let (s, c) = m.centred_moment(rho, &norm_of(norm_r)?).map_err(fail)?;
        unsafe { *sigma = s };
        if !center.is_null() {
            unsafe { ptr::copy_nonoverlapping(c.as_ptr(), center, c.len()) };
        }
        Ok(())
    })
}

/// Stores whether `mu <=_cx nu` in `ordered`.
///
/// # Safety
/// `mu`, `nu` must be live handles and `ordered` writable.
#[no_mangle]
pub unsafe extern "C" fn mwi_cx_check(mu: *const MwiMeasure, nu: *const MwiMeasure, ordered: *mut bool) -> MwiStatus {
    guard(|| {
        let (a, b) = unsafe { (measure(mu, "mu")?, measure(nu, "nu")?) };
        if ordered.is_null() {
            return Err(null("ordered"));
        }
        let r = check_cx(a, b).map_err(fail)?;
        unsafe { *ordered = r.ordered };
        Ok(())
    })
}

/// `K_rho` with its bounds; `gamma_step` is the grid spacing (1e-4 is a good default).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mwi_k_rho(rho: f64, gamma_step: f64, out: *mut MwiConstants) -> MwiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let r = k_rho(rho, gamma_step).map_err(fail)?;
        unsafe {
            *out = MwiConstants {
                rho: r.rho,
                f_sup: r.f_sup,
                x_star: r.x_star,
                k_est: r.k_est,
                k_lower: r.k_lower,
                k_upper: r.k_upper,
                gamma1_star: r.gamma1_star,
                gamma2_star: r.gamma2_star,
            }
        };
        Ok(())
    })
}

/// Inequality report for an ordered pair. `lambda` is read for [`MwiCase::Scaling`] only.
///
/// # Safety
/// `mu`, `nu` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mwi_verify_pair(
    mu: *const MwiMeasure,
    nu: *const MwiMeasure,
    rho: f64,
    norm_r: f64,
    case: MwiCase,
    lambda: f64,
    out: *mut MwiReport,
) -> MwiStatus {
    guard(|| {
        let (a, b) = unsafe { (measure(mu, "mu")?, measure(nu, "nu")?) };
        if out.is_null() {
            return Err(null("out"));
        }
        let tag = match case {
            MwiCase::OneD => CaseTag::OneD,
            MwiCase::Scaling => CaseTag::Scaling(lambda),
            MwiCase::Tensor => CaseTag::Tensor,
            MwiCase::Radial => CaseTag::Radial,
            MwiCase::Direction => CaseTag::Direction,
            MwiCase::Generic => CaseTag::Generic,
        };
        let r = verify_pair(a, b, rho, &norm_of(norm_r)?, tag).map_err(fail)?;
        unsafe {
            *out = MwiReport {
                rho: r.rho,
                w_rho: r.w_rho,
                sigma_rho: r.sigma_rho,
                m_rho: r.m_rho,
                itm_cost: r.itm_cost.unwrap_or(f64::NAN),
                ratio: r.ratio,
                bound: r.bound.unwrap_or(f64::NAN),
                slack: r.slack.unwrap_or(f64::NAN),
                surrogate: r.surrogate,
            }
        };
        Ok(())
    })
}

/// Message of the last failure on this thread; empty if none. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mwi_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn mwi_status_string(status: MwiStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        MwiStatus::Ok => b"ok\0",
        MwiStatus::NullPointer => b"null pointer\0",
        MwiStatus::Domain => b"argument out of domain\0",
        MwiStatus::InvalidMeasure => b"invalid measure\0",
        MwiStatus::DimensionMismatch => b"dimension mismatch\0",
        MwiStatus::NotInConvexOrder => b"measures are not in the convex order\0",
        MwiStatus::EqualMeasures => b"measures are equal\0",
        MwiStatus::Degenerate => b"degenerate input\0",
        MwiStatus::LinearProgram => b"linear program failed\0",
        MwiStatus::Internal => b"internal error\0",
        MwiStatus::Panic => b"panic\0",
    };
    s.as_ptr().cast()
}

//! C ABI over the core library: opaque handles, integer status codes, and
//! out-parameters. The header `include/aclab.h` is generated by cbindgen at
//! build time.
//!
//! Ownership: constructors return heap handles that must be released with the
//! matching `_free`; every pointer argument must be valid for the duration of
//! the call. Functions touch no global state other than the thread-local
//! last-error message.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use aclab::comparison;
use aclab::potential::Potential;
use aclab::profile::{heteroclinic, Profile1d};
use aclab::spectral;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum AclabStatus {
    Ok = 0,
    InvalidArgument = 1,
    OutOfDomain = 2,
    NotConverged = 3,
    IoError = 4,
    InternalError = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("error message had NUL").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn aclab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some(c) => c.as_ptr(),
        None => std::ptr::null(),
    })
}

/// Crate version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn aclab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Opaque potential handle.
pub struct AclabPotential(Potential);
/// Opaque 1D connection-profile handle.
pub struct AclabProfile(Profile1d);

fn guard<T, F: FnOnce() -> Result<T, (AclabStatus, String)>>(out: *mut T, f: F) -> c_int {
    let result = catch_unwind(AssertUnwindSafe(f));
    match result {
        Ok(Ok(v)) => {
            if out.is_null() {
                set_error("null output pointer".into());
                return AclabStatus::InvalidArgument as c_int;
            }
            unsafe { out.write(v) };
            clear_error();
            AclabStatus::Ok as c_int
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status as c_int
        }
        Err(_) => {
            set_error("internal panic".into());
            AclabStatus::InternalError as c_int
        }
    }
}

/// New quartic double-well potential. Never fails.
#[no_mangle]
pub extern "C" fn aclab_potential_quartic() -> *mut AclabPotential {
    Box::into_raw(Box::new(AclabPotential(Potential::quartic())))
}

/// Quartic well shifted so the positive minimum sits at the origin.
#[no_mangle]
pub extern "C" fn aclab_potential_quartic_shifted() -> *mut AclabPotential {
    Box::into_raw(Box::new(AclabPotential(Potential::quartic_shifted())))
}

/// Tabulated potential from a `u,w,dw,ddw` CSV. Returns NULL on failure
/// (see `aclab_last_error_message`).
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn aclab_potential_from_csv(path: *const c_char, m_threshold: f64) -> *mut AclabPotential {
    if path.is_null() {
        set_error("null path".into());
        return std::ptr::null_mut();
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(s) => s,
        Err(_) => {
            set_error("path is not valid UTF-8".into());
            return std::ptr::null_mut();
        }
    };
    match Potential::from_table_csv(Path::new(path), m_threshold) {
        Ok(p) => {
            clear_error();
            Box::into_raw(Box::new(AclabPotential(p)))
        }
        Err(e) => {
            set_error(e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Evaluates `W` (order 0) or its derivatives (orders 1..=3) at `u`.
///
/// # Safety
/// `p` must be a live handle from a constructor; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aclab_potential_eval(
    p: *const AclabPotential,
    u: f64,
    order: c_int,
    out: *mut f64,
) -> c_int {
    guard(out, || {
        let p = p.as_ref().ok_or((AclabStatus::InvalidArgument, "null potential".to_string()))?;
        let r = match order {
            0 => p.0.w(u),
            1 => p.0.dw(u),
            2 => p.0.ddw(u),
            3 => p.0.dddw(u),
            _ => return Err((AclabStatus::InvalidArgument, format!("derivative order {order} not in 0..=3"))),
        };
        r.map_err(|e| (AclabStatus::OutOfDomain, e.to_string()))
    })
}

/// Convexity constants of the shifted well: writes `c`, `q_star`, `w_bar`.
///
/// # Safety
/// `p` must be a live handle; the three out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn aclab_potential_well_constants(
    p: *const AclabPotential,
    m0: f64,
    grid_step: f64,
    c_out: *mut f64,
    q_star_out: *mut f64,
    w_bar_out: *mut f64,
) -> c_int {
    if q_star_out.is_null() || w_bar_out.is_null() {
        set_error("null output pointer".into());
        return AclabStatus::InvalidArgument as c_int;
    }
    guard(c_out, || {
        let p = p.as_ref().ok_or((AclabStatus::InvalidArgument, "null potential".to_string()))?;
        let k = p
            .0
            .well_constants(m0, grid_step)
            .map_err(|e| (AclabStatus::InvalidArgument, e.to_string()))?;
        q_star_out.write(k.q_star);
        w_bar_out.write(k.w_bar);
        Ok(k.c)
    })
}

/// # Safety
/// `p` must be a handle returned by a constructor, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn aclab_potential_free(p: *mut AclabPotential) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Builds the odd connection profile on `[-l_max, l_max]` with spacing `h`.
/// Returns NULL on failure.
///
/// # Safety
/// `p` must be a live potential handle.
#[no_mangle]
pub unsafe extern "C" fn aclab_profile_build(
    p: *const AclabPotential,
    l_max: f64,
    h: f64,
) -> *mut AclabProfile {
    let Some(p) = p.as_ref() else {
        set_error("null potential".into());
        return std::ptr::null_mut();
    };
    match heteroclinic(&p.0, l_max, h) {
        Ok(pr) => {
            clear_error();
            Box::into_raw(Box::new(AclabProfile(pr)))
        }
        Err(e) => {
            set_error(e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// `ū(s)` by monotone interpolation, odd-extended.
///
/// # Safety
/// `pr` must be a live profile handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn aclab_profile_eval(pr: *const AclabProfile, s: f64, out: *mut f64) -> c_int {
    guard(out, || {
        let pr = pr.as_ref().ok_or((AclabStatus::InvalidArgument, "null profile".to_string()))?;
        Ok(pr.0.eval(s))
    })
}

/// `ū'(s)`.
///
/// # Safety
/// `pr` must be a live profile handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn aclab_profile_eval_deriv(pr: *const AclabProfile, s: f64, out: *mut f64) -> c_int {
    guard(out, || {
        let pr = pr.as_ref().ok_or((AclabStatus::InvalidArgument, "null profile".to_string()))?;
        Ok(pr.0.eval_deriv(s))
    })
}

/// Fitted decay envelope `(k, K)` of the profile tail.
///
/// # Safety
/// `pr` must be a live profile handle; both out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn aclab_profile_decay(pr: *const AclabProfile, k_out: *mut f64, big_k_out: *mut f64) -> c_int {
    if big_k_out.is_null() {
        set_error("null output pointer".into());
        return AclabStatus::InvalidArgument as c_int;
    }
    guard(k_out, || {
        let pr = pr.as_ref().ok_or((AclabStatus::InvalidArgument, "null profile".to_string()))?;
        let (k, big_k) = pr.0.decay_constants().map_err(|e| (AclabStatus::NotConverged, e.to_string()))?;
        big_k_out.write(big_k);
        Ok(k)
    })
}

/// Transition energy of the connection.
///
/// # Safety
/// `pr` must be a live profile handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn aclab_profile_energy(pr: *const AclabProfile, out: *mut f64) -> c_int {
    guard(out, || {
        let pr = pr.as_ref().ok_or((AclabStatus::InvalidArgument, "null profile".to_string()))?;
        Ok(pr.0.energy())
    })
}

/// # Safety
/// `pr` must be a handle returned by `aclab_profile_build`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn aclab_profile_free(pr: *mut AclabProfile) {
    if !pr.is_null() {
        drop(Box::from_raw(pr));
    }
}

/// Lowest eigenvalues of the transverse linearization on `(-l, l)`, split by
/// parity: writes the even and odd sector bottoms.
///
/// # Safety
/// `pr` must be a live profile handle; both out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn aclab_spectrum(
    pr: *const AclabProfile,
    l: f64,
    h: f64,
    lambda_even_out: *mut f64,
    lambda_odd_out: *mut f64,
) -> c_int {
    if lambda_odd_out.is_null() {
        set_error("null output pointer".into());
        return AclabStatus::InvalidArgument as c_int;
    }
    guard(lambda_even_out, || {
        let pr = pr.as_ref().ok_or((AclabStatus::InvalidArgument, "null profile".to_string()))?;
        let op = spectral::build_operator(&pr.0, l, h)
            .map_err(|e| (AclabStatus::InvalidArgument, e.to_string()))?;
        let (le, _) = spectral::parity_eigen(&op, spectral::Parity::Even)
            .map_err(|e| (AclabStatus::NotConverged, e.to_string()))?;
        let (lo, _) = spectral::parity_eigen(&op, spectral::Parity::Odd)
            .map_err(|e| (AclabStatus::NotConverged, e.to_string()))?;
        lambda_odd_out.write(lo);
        Ok(le)
    })
}

/// Center value `φ(0)` of the radial comparison solution with `φ = q_bar` on
/// the sphere of radius `big_r` in dimension `n`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aclab_comparison_center_value(
    c: f64,
    q_bar: f64,
    big_r: f64,
    n: c_int,
    h: f64,
    out: *mut f64,
) -> c_int {
    guard(out, || {
        if !(1..=3).contains(&n) {
            return Err((AclabStatus::InvalidArgument, format!("dimension {n} not in 1..=3")));
        }
        comparison::radial_solve(c, q_bar, big_r, n as usize, h)
            .map(|sol| sol.phi0())
            .map_err(|e| (AclabStatus::InvalidArgument, e.to_string()))
    })
}

/// Fitted center-value decay `(k0, K0)` over radii `[r_lo, r_hi]`.
///
/// # Safety
/// Both out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn aclab_comparison_fit_k0(
    c: f64,
    q_bar: f64,
    n: c_int,
    r_lo: f64,
    r_hi: f64,
    k0_out: *mut f64,
    big_k0_out: *mut f64,
) -> c_int {
    if big_k0_out.is_null() {
        set_error("null output pointer".into());
        return AclabStatus::InvalidArgument as c_int;
    }
    guard(k0_out, || {
        if !(1..=3).contains(&n) {
            return Err((AclabStatus::InvalidArgument, format!("dimension {n} not in 1..=3")));
        }
        let (k0, big_k0) = comparison::fit_k0(c, q_bar, n as usize, r_lo, r_hi, 31)
            .map_err(|e| (AclabStatus::InvalidArgument, e.to_string()))?;
        big_k0_out.write(big_k0);
        Ok(k0)
    })
}

/// Runs the full batch pipeline from a TOML config path: profile, solve,
/// configured checks, report. `Ok` when everything passed, `NotConverged`
/// when the solver ran out of iterations; the report is written either way
/// when the config itself is valid.
///
/// # Safety
/// `config_path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn aclab_run_config(config_path: *const c_char) -> c_int {
    if config_path.is_null() {
        set_error("null path".into());
        return AclabStatus::InvalidArgument as c_int;
    }
    let path = match CStr::from_ptr(config_path).to_str() {
        Ok(s) => s.to_string(),
        Err(_) => {
            set_error("path is not valid UTF-8".into());
            return AclabStatus::InvalidArgument as c_int;
        }
    };
    let result = catch_unwind(AssertUnwindSafe(|| {
        let cfg = aclab::config::ExperimentConfig::load(Path::new(&path))
            .map_err(|e| (AclabStatus::InvalidArgument, e.to_string()))?;
        let out = aclab::run::run(&cfg, None).map_err(|e| (AclabStatus::IoError, e.to_string()))?;
        if !out.converged {
            return Err((AclabStatus::NotConverged, "solver did not converge".to_string()));
        }
        if !out.pass {
            return Err((AclabStatus::InternalError, "one or more checks failed".to_string()));
        }
        Ok(())
    }));
    match result {
        Ok(Ok(())) => {
            clear_error();
            AclabStatus::Ok as c_int
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status as c_int
        }
        Err(_) => {
            set_error("internal panic".into());
            AclabStatus::InternalError as c_int
        }
    }
}

//! C ABI over the Fock-state toolkit: opaque threshold-curve handles,
//! status codes instead of panics, and UTF-8 strings allocated on the
//! library side. Every pointer argument is null-checked; the per-thread
//! message from the last failure is available via `fq_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use fockqng::error::FockError;
use fockqng::hilbert::{displacement_overlap, FockDistribution};
use fockqng::metrology::{fisher_profile, force_sensitivity, qfi_fock, ForceParams};
use fockqng::qng::{
    qng_depth, qng_witness, threshold_curve, OptimizerConfig, QngPoint, ThresholdCurve,
};
use num_complex::Complex64;

/// Outcome of an FFI call; anything but `Ok` leaves the outputs untouched.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FqStatus {
    /// Success.
    Ok = 0,
    /// A null pointer or zero-length buffer was passed.
    NullArgument = 1,
    /// Input violates a physical or domain constraint.
    Domain = 2,
    /// A string or file payload could not be parsed.
    Parse = 3,
    /// An iterative routine failed to converge.
    Numeric = 4,
    /// The callee panicked; state is unchanged but the call did nothing.
    Panic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &FockError) -> FqStatus {
    match e {
        FockError::Parse(_) | FockError::Io(_) => FqStatus::Parse,
        FockError::NonConvergence(_) | FockError::Integrator(_) | FockError::Optimizer(_)
        | FockError::FitFailure(_) => FqStatus::Numeric,
        _ => FqStatus::Domain,
    }
}

fn fail(e: FockError) -> FqStatus {
    let code = status_of(&e);
    set_error(e.to_string());
    code
}

/// Runs `f` with panics converted into `FqStatus::Panic`.
fn guarded<F: FnOnce() -> FqStatus>(f: F) -> FqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic".into());
            FqStatus::Panic
        }
    }
}

/// Message describing the most recent failure on this thread, or null when
/// no call has failed yet. The pointer stays valid until the next failing
/// call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn fq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |c| c.as_ptr())
    })
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn fq_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Frees a string returned by this library. Null is a no-op.
#[no_mangle]
pub extern "C" fn fq_string_free(s: *mut c_char) {
    if !s.is_null() {
        unsafe { drop(CString::from_raw(s)) };
    }
}

/// Opaque non-Gaussianity threshold curve for one Fock index.
pub struct FqCurve(ThresholdCurve);

/// Computes the threshold curve for target `n` by multi-start optimization
/// over core states. `a_grid` lists the witness slopes to sample (ascending,
/// starting at 0). Pass `restarts = 0` or `dim = 0` to use the defaults.
/// On success `*out` owns the curve; release it with `fq_curve_free`.
///
/// # Safety
/// `a_grid` must point to `a_len` readable doubles and `out` must be a valid
/// destination for one pointer.
#[no_mangle]
pub unsafe extern "C" fn fq_curve_compute(
    n: usize,
    dim: usize,
    restarts: usize,
    seed: u64,
    a_grid: *const f64,
    a_len: usize,
    out: *mut *mut FqCurve,
) -> FqStatus {
    guarded(|| {
        if a_grid.is_null() || out.is_null() || a_len == 0 {
            set_error("null argument to fq_curve_compute".into());
            return FqStatus::NullArgument;
        }
        let grid = unsafe { std::slice::from_raw_parts(a_grid, a_len) };
        let mut cfg = OptimizerConfig::default();
        if restarts > 0 {
            cfg.restarts = restarts;
        }
        if dim > 0 {
            cfg.dim = dim;
        }
        cfg.seed = seed;
        match threshold_curve(n, grid, &cfg) {
            Ok(curve) => {
                unsafe { *out = Box::into_raw(Box::new(FqCurve(curve))) };
                FqStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Deserializes a curve previously produced by `fq_curve_to_json`.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid
/// destination for one pointer.
#[no_mangle]
pub unsafe extern "C" fn fq_curve_from_json(
    json: *const c_char,
    out: *mut *mut FqCurve,
) -> FqStatus {
    guarded(|| {
        if json.is_null() || out.is_null() {
            set_error("null argument to fq_curve_from_json".into());
            return FqStatus::NullArgument;
        }
        let text = match unsafe { CStr::from_ptr(json) }.to_str() {
            Ok(t) => t,
            Err(_) => {
                set_error("curve JSON is not valid UTF-8".into());
                return FqStatus::Parse;
            }
        };
        match ThresholdCurve::from_json(text) {
            Ok(curve) => {
                unsafe { *out = Box::into_raw(Box::new(FqCurve(curve))) };
                FqStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Serializes the curve; free the result with `fq_string_free`.
///
/// # Safety
/// `curve` must be a live handle from this library and `out` a valid
/// destination for one pointer.
#[no_mangle]
pub unsafe extern "C" fn fq_curve_to_json(
    curve: *const FqCurve,
    out: *mut *mut c_char,
) -> FqStatus {
    guarded(|| {
        if curve.is_null() || out.is_null() {
            set_error("null argument to fq_curve_to_json".into());
            return FqStatus::NullArgument;
        }
        match unsafe { &*curve }.0.to_json() {
            Ok(text) => match CString::new(text) {
                Ok(c) => {
                    unsafe { *out = c.into_raw() };
                    FqStatus::Ok
                }
                Err(_) => {
                    set_error("curve JSON contained an interior NUL".into());
                    FqStatus::Parse
                }
            },
            Err(e) => fail(e),
        }
    })
}

/// Releases a curve handle. Null is a no-op.
///
/// # Safety
/// `curve` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn fq_curve_free(curve: *mut FqCurve) {
    if !curve.is_null() {
        drop(unsafe { Box::from_raw(curve) });
    }
}

/// Point threshold of the curve: the largest admissible P_n.
///
/// # Safety
/// `curve` must be a live handle and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn fq_curve_pbar(curve: *const FqCurve, out: *mut f64) -> FqStatus {
    guarded(|| {
        if curve.is_null() || out.is_null() {
            set_error("null argument to fq_curve_pbar".into());
            return FqStatus::NullArgument;
        }
        unsafe { *out = (*curve).0.max_p_n() };
        FqStatus::Ok
    })
}

fn dist_from_raw(probs: *const f64, len: usize) -> Result<FockDistribution, FockError> {
    if len == 0 {
        return Err(FockError::BadDimension(0));
    }
    let slice = unsafe { std::slice::from_raw_parts(probs, len) };
    FockDistribution::new(slice.to_vec())
}

/// Tests a measured distribution against the curve. `violated` is 1 when
/// the witness fires, 0 otherwise; `margin` is the excess over the boundary
/// in probability units (negative when compatible with core states).
///
/// # Safety
/// `probs` must point to `len` readable doubles; outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn fq_qng_witness(
    curve: *const FqCurve,
    probs: *const f64,
    len: usize,
    n: usize,
    violated: *mut i32,
    margin: *mut f64,
) -> FqStatus {
    guarded(|| {
        if curve.is_null() || probs.is_null() || violated.is_null() || margin.is_null() {
            set_error("null argument to fq_qng_witness".into());
            return FqStatus::NullArgument;
        }
        let run = || -> Result<(bool, f64), FockError> {
            let dist = dist_from_raw(probs, len)?;
            let point = QngPoint::from_distribution(&dist, n)?;
            let w = qng_witness(&point, &unsafe { &*curve }.0)?;
            Ok((w.violated, w.margin))
        };
        match run() {
            Ok((v, m)) => {
                unsafe {
                    *violated = v as i32;
                    *margin = m;
                }
                FqStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Loss depth of a distribution: the tolerable attenuation in dB before the
/// witness stops firing, and the matching minimal transmittance. A state
/// that never violates reports 0 dB and transmittance 1.
///
/// # Safety
/// `probs` must point to `len` readable doubles; outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn fq_qng_depth(
    curve: *const FqCurve,
    probs: *const f64,
    len: usize,
    n: usize,
    depth_db: *mut f64,
    eta_min: *mut f64,
) -> FqStatus {
    guarded(|| {
        if curve.is_null() || probs.is_null() || depth_db.is_null() || eta_min.is_null() {
            set_error("null argument to fq_qng_depth".into());
            return FqStatus::NullArgument;
        }
        let run = || -> Result<(f64, f64), FockError> {
            let dist = dist_from_raw(probs, len)?;
            let d = qng_depth(&dist, n, &unsafe { &*curve }.0)?;
            Ok((d.depth_db, d.eta_min))
        };
        match run() {
            Ok((db, eta)) => {
                unsafe {
                    *depth_db = db;
                    *eta_min = eta;
                }
                FqStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Quantum Fisher information of the Fock state |n> for displacement
/// sensing: 4(2n + 1).
#[no_mangle]
pub extern "C" fn fq_qfi_fock(n: usize) -> f64 {
    qfi_fock(n)
}

/// Transition probability |<m|D(alpha)|n>|^2 of the displacement operator.
///
/// # Safety
/// `out` must be a valid destination for one double.
#[no_mangle]
pub unsafe extern "C" fn fq_displacement_overlap(
    m: usize,
    n: usize,
    alpha_re: f64,
    alpha_im: f64,
    out: *mut f64,
) -> FqStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null argument to fq_displacement_overlap".into());
            return FqStatus::NullArgument;
        }
        unsafe { *out = displacement_overlap(m, n, Complex64::new(alpha_re, alpha_im)) };
        FqStatus::Ok
    })
}

/// Classical Fisher information for displacement amplitude, maximized over
/// the supplied ascending positive amplitude grid.
///
/// # Safety
/// `probs` and `alpha_grid` must point to `len` and `grid_len` readable
/// doubles; outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn fq_fisher_profile(
    probs: *const f64,
    len: usize,
    alpha_grid: *const f64,
    grid_len: usize,
    fi_max: *mut f64,
    d0: *mut f64,
) -> FqStatus {
    guarded(|| {
        if probs.is_null() || alpha_grid.is_null() || fi_max.is_null() || d0.is_null() {
            set_error("null argument to fq_fisher_profile".into());
            return FqStatus::NullArgument;
        }
        if grid_len == 0 {
            set_error("empty amplitude grid".into());
            return FqStatus::NullArgument;
        }
        let run = || -> Result<(f64, f64), FockError> {
            let dist = dist_from_raw(probs, len)?;
            let grid = unsafe { std::slice::from_raw_parts(alpha_grid, grid_len) };
            let profile = fisher_profile(&dist, grid)?;
            Ok((profile.fi_max, profile.d0))
        };
        match run() {
            Ok((f, d)) => {
                unsafe {
                    *fi_max = f;
                    *d0 = d;
                }
                FqStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Cramér–Rao force-sensitivity bound in N/sqrt(Hz) for an oscillator probe
/// of mass `mass` (kg) and angular frequency `omega` (rad/s), probed
/// coherently for `t_probe` out of every `t_probe + t_dead` seconds and
/// averaged over `total_time`, with probe quantum Fisher information `fq`.
///
/// # Safety
/// `out` must be a valid destination for one double.
#[no_mangle]
pub unsafe extern "C" fn fq_force_sensitivity(
    mass: f64,
    omega: f64,
    t_probe: f64,
    t_dead: f64,
    total_time: f64,
    fq: f64,
    out: *mut f64,
) -> FqStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null argument to fq_force_sensitivity".into());
            return FqStatus::NullArgument;
        }
        let params = ForceParams {
            mass,
            omega,
            t_probe,
            t_dead,
            total_time,
            fq,
        };
        match force_sensitivity(&params) {
            Ok(s) => {
                unsafe { *out = s.delta_f0_per_sqrt_hz };
                FqStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

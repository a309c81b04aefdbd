//! C ABI over `levy-coupling`.
//!
//! Every function returns an [`LcStatus`]; on failure the message is kept in
//! a thread-local slot readable with [`lc_last_error_message`]. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use levy_coupling::cli::{pipeline, Pipeline};
use levy_coupling::config::{Experiment, ExperimentConfig};
use levy_coupling::coupling_sim::{simulate_pair, SimConfig, Stepper};
use levy_coupling::ergodicity::estimate_decay;
use levy_coupling::generator::Profile;
use levy_coupling::Error;

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Malformed config text or an I/O failure.
    Config = 3,
    /// The constant chain has no contraction (for example `lambda*(R0) = 0`).
    Degenerate = 4,
    /// Quadrature, root finding or a grid check failed.
    Numerical = 5,
    /// A trajectory blew up or the decay fit had no usable window.
    Simulation = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// A parsed and validated experiment config.
pub struct LcExperiment {
    exp: Experiment,
}

/// Constants, Lyapunov data and the distance profile for an experiment.
pub struct LcConstants {
    pipeline: Pipeline,
}

/// Scalar results of the constant chain. `rate`, `eps` and `c1` may be zero
/// through underflow; their logarithms are always finite.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LcConstantsSummary {
    pub alpha: f64,
    pub alpha0: f64,
    pub kappa: f64,
    pub r0_big: f64,
    pub c_star_big: f64,
    pub c2: f64,
    pub c1: f64,
    pub ln_c1: f64,
    pub eps: f64,
    pub ln_eps: f64,
    pub rate: f64,
    pub ln_rate: f64,
    pub ln_unit: f64,
    pub underflow: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LcDecaySummary {
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub r2: f64,
    pub replicas: usize,
    pub blow_ups: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> LcStatus {
    match e {
        Error::Config(_) | Error::Io(_) => LcStatus::Config,
        Error::DegenerateState(_) => LcStatus::Degenerate,
        Error::ShiftIsZero
        | Error::NonPositiveRadius(_)
        | Error::InvalidParameter(_)
        | Error::DimensionMismatch { .. }
        | Error::InvalidCross { .. } => LcStatus::InvalidArgument,
        Error::NonFiniteState { .. } | Error::InsufficientDecay(_) | Error::CutoffTooSmall { .. } => {
            LcStatus::Simulation
        }
        _ => LcStatus::Numerical,
    }
}

/// Runs `f`, mapping errors and panics to a status and recording the message.
fn guard<F: FnOnce() -> Result<(), (LcStatus, String)>>(f: F) -> LcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("panic: {msg}"));
            LcStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (LcStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (LcStatus, String) {
    (LcStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (LcStatus, String)> {
    // SAFETY: the caller passes a pointer obtained from this library or null
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), (LcStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    // SAFETY: non-null and, by contract, valid for writes
    unsafe { out.write(value) };
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes of the last error message on this thread, without the
/// terminating NUL; 0 when there is none.
#[no_mangle]
pub extern "C" fn lc_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |m| m.as_bytes().len()))
}

/// Copies the last error message (NUL-terminated) into `buf`.
///
/// # Safety
/// `buf` must be valid for `len` bytes of writes.
#[no_mangle]
pub unsafe extern "C" fn lc_last_error_message(buf: *mut c_char, len: usize) -> LcStatus {
    if buf.is_null() {
        return LcStatus::NullPointer;
    }
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&[0u8][..], |m| m.as_bytes_with_nul());
        if bytes.len() > len {
            return LcStatus::BufferTooSmall;
        }
        // SAFETY: `buf` holds at least `len >= bytes.len()` bytes
        unsafe { ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, bytes.len()) };
        LcStatus::Ok
    })
}

#[no_mangle]
pub extern "C" fn lc_clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// The benchmark experiment.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn lc_experiment_new_default(out: *mut *mut LcExperiment) -> LcStatus {
    guard(|| {
        let exp = ExperimentConfig::default().build().map_err(lib_err)?;
        unsafe { write_out(out, Box::into_raw(Box::new(LcExperiment { exp })), "out") }
    })
}

/// Parses a TOML experiment config.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn lc_experiment_from_toml(toml: *const c_char, out: *mut *mut LcExperiment) -> LcStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null("toml"));
        }
        // SAFETY: non-null and NUL-terminated by contract
        let text = unsafe { CStr::from_ptr(toml) }
            .to_str()
            .map_err(|e| (LcStatus::InvalidArgument, format!("config is not UTF-8: {e}")))?;
        let exp = ExperimentConfig::from_toml(text).and_then(|c| c.build()).map_err(lib_err)?;
        unsafe { write_out(out, Box::into_raw(Box::new(LcExperiment { exp })), "out") }
    })
}

/// # Safety
/// `exp` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lc_experiment_free(exp: *mut LcExperiment) {
    if !exp.is_null() {
        // SAFETY: created by Box::into_raw in this library
        drop(unsafe { Box::from_raw(exp) });
    }
}

/// # Safety
/// `exp` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lc_experiment_dim(exp: *const LcExperiment, out: *mut usize) -> LcStatus {
    guard(|| {
        let e = unsafe { deref(exp, "exp") }?;
        unsafe { write_out(out, e.exp.sys.dim, "out") }
    })
}

/// `nu*_x(R^d)` for the experiment's noise; `x` holds `dim` values.
///
/// # Safety
/// `exp` must be a live handle; `x` valid for `dim` reads; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lc_overlap_mass(exp: *const LcExperiment, x: *const f64, dim: usize, out: *mut f64) -> LcStatus {
    guard(|| {
        let e = unsafe { deref(exp, "exp") }?;
        if x.is_null() {
            return Err(null("x"));
        }
        if dim != e.exp.sys.dim {
            return Err(lib_err(Error::DimensionMismatch { expected: e.exp.sys.dim, got: dim }));
        }
        // SAFETY: `x` holds `dim` values by contract
        let x = unsafe { std::slice::from_raw_parts(x, dim) };
        let m = e.exp.nu.overlap_mass(x).map_err(lib_err)?;
        unsafe { write_out(out, m, "out") }
    })
}

/// Derives the inputs and runs the constant chain.
///
/// # Safety
/// `exp` must be a live handle; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn lc_constants_compute(exp: *const LcExperiment, out: *mut *mut LcConstants) -> LcStatus {
    guard(|| {
        let e = unsafe { deref(exp, "exp") }?;
        let pipeline = pipeline(&e.exp).map_err(lib_err)?;
        unsafe { write_out(out, Box::into_raw(Box::new(LcConstants { pipeline })), "out") }
    })
}

/// # Safety
/// `c` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lc_constants_free(c: *mut LcConstants) {
    if !c.is_null() {
        // SAFETY: created by Box::into_raw in this library
        drop(unsafe { Box::from_raw(c) });
    }
}

/// # Safety
/// `c` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lc_constants_summary(c: *const LcConstants, out: *mut LcConstantsSummary) -> LcStatus {
    guard(|| {
        let r = &unsafe { deref(c, "constants") }?.pipeline.report;
        let s = LcConstantsSummary {
            alpha: r.alpha,
            alpha0: r.alpha0,
            kappa: r.kappa,
            r0_big: r.r0_big,
            c_star_big: r.c_star_big,
            c2: r.c2,
            c1: r.c1,
            ln_c1: r.ln_c1,
            eps: r.eps,
            ln_eps: r.ln_eps,
            rate: r.rate,
            ln_rate: r.ln_rate,
            ln_unit: r.ln_unit,
            underflow: r.underflow,
        };
        unsafe { write_out(out, s, "out") }
    })
}

/// `f(s ∧ R0) / L`, the truncated distance profile in units of its rise length.
///
/// # Safety
/// `c` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lc_constants_profile(c: *const LcConstants, s: f64, out: *mut f64) -> LcStatus {
    guard(|| {
        let p = &unsafe { deref(c, "constants") }?.pipeline;
        if s.is_nan() || s < 0.0 {
            return Err((LcStatus::InvalidArgument, format!("s must be >= 0, got {s}")));
        }
        unsafe { write_out(out, p.profile.hat().value(s), "out") }
    })
}

fn sim_config(exp: &Experiment, replicas: usize, horizon: f64, seed: u64) -> Result<SimConfig, (LcStatus, String)> {
    let cfg = SimConfig { replicas, horizon, seed, ..exp.config.sim.clone() };
    cfg.validate().map_err(lib_err)?;
    Ok(cfg)
}

/// Simulates one coupled pair from the experiment's initial state and writes
/// `(x, v, x', v')` at the horizon into `out` (`4 * dim` values).
///
/// # Safety
/// Handles must be live; `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn lc_simulate_pair(
    exp: *const LcExperiment,
    c: *const LcConstants,
    horizon: f64,
    seed: u64,
    replica: usize,
    out: *mut f64,
    len: usize,
) -> LcStatus {
    guard(|| {
        let e = &unsafe { deref(exp, "exp") }?.exp;
        let p = &unsafe { deref(c, "constants") }?.pipeline;
        if out.is_null() {
            return Err(null("out"));
        }
        let d = e.sys.dim;
        if len < 4 * d {
            return Err((LcStatus::BufferTooSmall, format!("need {} values, got {len}", 4 * d)));
        }
        let cfg = sim_config(e, 1, horizon, seed)?;
        let stepper = Stepper::new(&e.sys, &e.nu, p.report.params(), cfg.delta, cfg.correction).map_err(lib_err)?;
        let tr = simulate_pair(&stepper, &cfg, &e.initial, replica).map_err(lib_err)?;
        let last = tr.states.last().ok_or_else(|| (LcStatus::Simulation, "empty trajectory".to_string()))?;
        // SAFETY: `out` holds at least `4 * d` values
        let dst = unsafe { std::slice::from_raw_parts_mut(out, 4 * d) };
        for (k, part) in [&last.x, &last.v, &last.xp, &last.vp].into_iter().enumerate() {
            dst[k * d..(k + 1) * d].copy_from_slice(part);
        }
        Ok(())
    })
}

/// Fits the decay rate of the contraction functional over `replicas` pairs.
///
/// # Safety
/// Handles must be live; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lc_estimate_decay(
    exp: *const LcExperiment,
    c: *const LcConstants,
    replicas: usize,
    horizon: f64,
    seed: u64,
    out: *mut LcDecaySummary,
) -> LcStatus {
    guard(|| {
        let e = &unsafe { deref(exp, "exp") }?.exp;
        let p = &unsafe { deref(c, "constants") }?.pipeline;
        let cfg = sim_config(e, replicas, horizon, seed)?;
        let stepper = Stepper::new(&e.sys, &e.nu, p.report.params(), cfg.delta, cfg.correction).map_err(lib_err)?;
        let r = estimate_decay(&stepper, &cfg, |_| e.initial.clone(), p.functionals(), Some(p.report.rate))
            .map_err(lib_err)?;
        let s = LcDecaySummary {
            rate: r.rate,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            r2: r.r2,
            replicas: r.replicas,
            blow_ups: r.blow_ups,
        };
        unsafe { write_out(out, s, "out") }
    })
}

//! C ABI over `iscc-core`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_load`
//! style constructors and released with the matching `*_free`. Every
//! fallible call returns an [`IsccStatus`]; on failure a message is kept per
//! thread and can be read with [`iscc_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use iscc_core::channels::draw_seeded;
use iscc_core::orchestrator::{run, RunOptions, RunResult, RunStatus, Scheme};
use iscc_core::{ChannelSet, Error, SystemConfig};

/// Return code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsccStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Infeasible = 4,
    Io = 5,
    BufferTooSmall = 6,
    Internal = 7,
}

/// Outcome of an optimizer run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsccRunStatus {
    Converged = 0,
    MaxIter = 1,
    InfeasibleSensing = 2,
}

/// System configuration handle.
pub struct IsccConfig(SystemConfig);

/// Channel realization handle.
pub struct IsccChannels(ChannelSet);

/// Optimizer result handle.
pub struct IsccResult(RunResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(err: &Error) -> IsccStatus {
    match err {
        Error::Config { .. } | Error::Parse(_) | Error::UnknownScheme(_) => IsccStatus::Config,
        Error::Infeasible(_) => IsccStatus::Infeasible,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => IsccStatus::Io,
        Error::InvalidDimension(_) | Error::DimensionMismatch(_) | Error::Domain(_) | Error::EmptyGroup(_) => {
            IsccStatus::InvalidArgument
        }
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (IsccStatus, String)>) -> IsccStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            IsccStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            IsccStatus::Internal
        }
    }
}

fn core<T>(r: iscc_core::Result<T>) -> Result<T, (IsccStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (IsccStatus, String) {
    (IsccStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (IsccStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (IsccStatus::InvalidArgument, format!("`{what}` is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (IsccStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (IsccStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Copies `text` plus a terminating NUL into `buf` when it fits. `needed`
/// (optional) receives the required size including the NUL.
unsafe fn copy_out(text: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> Result<(), (IsccStatus, String)> {
    let want = text.len() + 1;
    if let Some(n) = needed.as_mut() {
        *n = want;
    }
    if buf.is_null() || len < want {
        return Err((IsccStatus::BufferTooSmall, format!("buffer needs {want} bytes")));
    }
    ptr::copy_nonoverlapping(text.as_ptr(), buf.cast::<u8>(), text.len());
    *buf.add(text.len()) = 0;
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn iscc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn iscc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Built-in desk-scale configuration.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn iscc_config_default(out: *mut *mut IsccConfig) -> IsccStatus {
    guard(|| {
        *out_arg(out, "out")? = Box::into_raw(Box::new(IsccConfig(SystemConfig::default())));
        Ok(())
    })
}

/// Built-in configuration with the full-size surface.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn iscc_config_paper_scale(out: *mut *mut IsccConfig) -> IsccStatus {
    guard(|| {
        *out_arg(out, "out")? = Box::into_raw(Box::new(IsccConfig(SystemConfig::paper_scale())));
        Ok(())
    })
}

/// Parses a TOML configuration; missing keys take their defaults.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn iscc_config_from_toml(toml: *const c_char, out: *mut *mut IsccConfig) -> IsccStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cfg = core(SystemConfig::from_toml_str(str_arg(toml, "toml")?))?;
        core(cfg.validate())?;
        *out = Box::into_raw(Box::new(IsccConfig(cfg)));
        Ok(())
    })
}

/// Loads a TOML file, or `default` / `paper` for the built-in ones.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn iscc_config_load(path: *const c_char, out: *mut *mut IsccConfig) -> IsccStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cfg = core(SystemConfig::load(Path::new(str_arg(path, "path")?)))?;
        core(cfg.validate())?;
        *out = Box::into_raw(Box::new(IsccConfig(cfg)));
        Ok(())
    })
}

/// Serializes a configuration as TOML.
///
/// # Safety
/// `cfg` must be a live handle; `buf` must hold `len` bytes or be null;
/// `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn iscc_config_to_toml(
    cfg: *const IsccConfig,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> IsccStatus {
    guard(|| copy_out(&handle(cfg, "cfg")?.0.to_toml_string(), buf, len, needed))
}

/// Reflecting-element count.
///
/// # Safety
/// `cfg` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn iscc_config_m_passive(cfg: *const IsccConfig) -> usize {
    cfg.as_ref().map_or(0, |c| c.0.m_passive)
}

/// # Safety
/// `cfg` must come from this library and not be freed twice; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn iscc_config_free(cfg: *mut IsccConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Draws a channel realization from `seed`.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn iscc_channels_draw(
    cfg: *const IsccConfig,
    seed: u64,
    out: *mut *mut IsccChannels,
) -> IsccStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let ch = core(draw_seeded(&handle(cfg, "cfg")?.0, seed))?;
        *out = Box::into_raw(Box::new(IsccChannels(ch)));
        Ok(())
    })
}

/// # Safety
/// `ch` must come from this library and not be freed twice; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn iscc_channels_free(ch: *mut IsccChannels) {
    if !ch.is_null() {
        drop(Box::from_raw(ch));
    }
}

/// Runs the optimizer. `scheme` is a scheme name such as `proposed` or
/// `fixed-phase`; null selects `proposed`. `max_iter` of 0 keeps the default.
/// An unreachable radar threshold is not an error: the result reports
/// `InfeasibleSensing`.
///
/// # Safety
/// Handles must be live; `scheme` must be null or NUL-terminated; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn iscc_run(
    cfg: *const IsccConfig,
    ch: *const IsccChannels,
    scheme: *const c_char,
    seed: u64,
    max_iter: usize,
    out: *mut *mut IsccResult,
) -> IsccStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let scheme = if scheme.is_null() {
            Scheme::Proposed
        } else {
            core(str_arg(scheme, "scheme")?.parse::<Scheme>())?
        };
        let mut opts = RunOptions {
            scheme,
            seed,
            ..RunOptions::default()
        };
        if max_iter > 0 {
            opts.max_iter = max_iter;
        }
        let r = core(run(&handle(cfg, "cfg")?.0, &handle(ch, "ch")?.0, &opts))?;
        *out = Box::into_raw(Box::new(IsccResult(r)));
        Ok(())
    })
}

/// # Safety
/// `res` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn iscc_result_status(res: *const IsccResult, out: *mut IsccRunStatus) -> IsccStatus {
    guard(|| {
        *out_arg(out, "out")? = match handle(res, "res")?.0.status {
            RunStatus::Converged => IsccRunStatus::Converged,
            RunStatus::MaxIter => IsccRunStatus::MaxIter,
            RunStatus::InfeasibleSensing => IsccRunStatus::InfeasibleSensing,
        };
        Ok(())
    })
}

/// Outer iterations performed.
///
/// # Safety
/// `res` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn iscc_result_iterations(res: *const IsccResult) -> usize {
    res.as_ref().map_or(0, |r| r.0.iterations)
}

/// Utility in bits (throughput plus computation bits minus backhaul cost).
///
/// # Safety
/// `res` must be a live handle or null (returns NaN).
#[no_mangle]
pub unsafe extern "C" fn iscc_result_utility(res: *const IsccResult) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.0.metrics.utility)
}

/// Communication plus computation bits.
///
/// # Safety
/// `res` must be a live handle or null (returns NaN).
#[no_mangle]
pub unsafe extern "C" fn iscc_result_sum_bits(res: *const IsccResult) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.0.metrics.sum_bits())
}

/// Copies up to `len` per-iteration surrogate values (row 0 is the initial
/// point) into `buf`. `count` receives the trace length.
///
/// # Safety
/// `res` must be live; `buf` must hold `len` doubles or be null; `count`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn iscc_result_trace(
    res: *const IsccResult,
    buf: *mut f64,
    len: usize,
    count: *mut usize,
) -> IsccStatus {
    guard(|| {
        let trace = &handle(res, "res")?.0.trace;
        *out_arg(count, "count")? = trace.len();
        if !buf.is_null() {
            for (i, row) in trace.iter().take(len).enumerate() {
                *buf.add(i) = row.surrogate;
            }
        }
        Ok(())
    })
}

/// Full result as JSON. Call with a null buffer to learn the size.
///
/// # Safety
/// `res` must be live; `buf` must hold `len` bytes or be null; `needed`
/// may be null.
#[no_mangle]
pub unsafe extern "C" fn iscc_result_json(
    res: *const IsccResult,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> IsccStatus {
    guard(|| {
        let json = core(handle(res, "res")?.0.to_json())?;
        copy_out(&json, buf, len, needed)
    })
}

/// Writes `result.json` and `trace.csv` into `dir`, creating it if needed.
///
/// # Safety
/// `res` must be live; `dir` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn iscc_result_save(res: *const IsccResult, dir: *const c_char) -> IsccStatus {
    guard(|| {
        let r = handle(res, "res")?;
        core(r.0.save(Path::new(str_arg(dir, "dir")?)))
    })
}

/// # Safety
/// `res` must come from this library and not be freed twice; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn iscc_result_free(res: *mut IsccResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

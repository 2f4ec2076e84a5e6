//! C interface to the slhjb solver.
//!
//! A solve returns an opaque [`SlhjbSolution`] handle that owns the value
//! field, the control field and the problem. Every fallible function returns
//! an [`SlhjbStatus`]; on failure [`slhjb_last_error`] describes the error
//! of the calling thread. Panics are caught at the boundary and reported as
//! [`SlhjbStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use slhjb::config::RunConfig;
use slhjb::run::{self, Solved};
use slhjb::{synthesis, Error};

/// Result codes.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlhjbStatus {
    Ok = 0,
    /// The solve finished without reaching the stopping tolerance; the
    /// handle is still valid.
    NotConverged = 1,
    NullPointer = 2,
    InvalidUtf8 = 3,
    /// Malformed or inconsistent configuration.
    Config = 4,
    /// Rejected problem data (grid, time step, dimensions).
    InvalidProblem = 5,
    /// Numerical failure during the sweeps.
    Numerical = 6,
    Io = 7,
    /// The caller's buffer has the wrong length.
    BufferSize = 8,
    Panic = 9,
}

/// Scalar facts about a solution.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SlhjbInfo {
    /// State dimension.
    pub dim: usize,
    /// Control dimension.
    pub controls: usize,
    /// Number of grid nodes.
    pub nodes: usize,
    /// Nodes per axis; entries past `dim` are 1.
    pub counts: [usize; 3],
    /// Lower domain corner; entries past `dim` are 0.
    pub lower: [f64; 3],
    pub spacing: f64,
    pub time_step: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub final_residual: f64,
}

/// Opaque solution handle.
pub struct SlhjbSolution {
    config: RunConfig,
    solved: Solved,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> SlhjbStatus {
    match e {
        Error::Config(_) | Error::ConfigParse { .. } | Error::Json(_) => SlhjbStatus::Config,
        Error::InvalidGrid(_)
        | Error::InvalidProblem(_)
        | Error::InfeasibleTimestep { .. }
        | Error::DimensionMismatch { .. }
        | Error::Unsupported(_) => SlhjbStatus::InvalidProblem,
        Error::EmptySector { .. } | Error::NonFinite { .. } => SlhjbStatus::Numerical,
        Error::Io(_) | Error::Csv(_) => SlhjbStatus::Io,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<SlhjbStatus, (SlhjbStatus, String)>) -> SlhjbStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SlhjbStatus::Panic
        }
    }
}

fn fail(e: Error) -> (SlhjbStatus, String) {
    (status_of(&e), e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (SlhjbStatus, String)> {
    if p.is_null() {
        return Err((SlhjbStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (SlhjbStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn handle<'a>(h: *const SlhjbSolution) -> Result<&'a SlhjbSolution, (SlhjbStatus, String)> {
    h.as_ref()
        .ok_or((SlhjbStatus::NullPointer, "solution handle is null".into()))
}

fn null(what: &str) -> (SlhjbStatus, String) {
    (SlhjbStatus::NullPointer, format!("{what} is null"))
}

/// Solves the problem described by a JSON run configuration (the format read
/// by the `slhjb` command line tool). On `Ok` or `NotConverged` `*out`
/// receives a handle to release with [`slhjb_solution_free`]; otherwise it is
/// set to null.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn slhjb_solve_json(config_json: *const c_char, out: *mut *mut SlhjbSolution) -> SlhjbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = str_arg(config_json, "config_json")?;
        let config = RunConfig::from_json(text).map_err(|e| (SlhjbStatus::Config, e.to_string()))?;
        let solved = run::solve(&config).map_err(fail)?;
        let status = if solved.report.converged {
            SlhjbStatus::Ok
        } else {
            set_error(format!("no convergence after {} sweeps", solved.report.sweeps));
            SlhjbStatus::NotConverged
        };
        *out = Box::into_raw(Box::new(SlhjbSolution { config, solved }));
        Ok(status)
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `solution` must come from [`slhjb_solve_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn slhjb_solution_free(solution: *mut SlhjbSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// # Safety
/// `solution` must be a live handle and `info` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn slhjb_solution_info(solution: *const SlhjbSolution, info: *mut SlhjbInfo) -> SlhjbStatus {
    guard(|| {
        let s = &handle(solution)?.solved;
        let info = info.as_mut().ok_or_else(|| null("info"))?;
        let grid = &s.spec.grid;
        let mut counts = [1usize; 3];
        let mut lower = [0.0; 3];
        counts[..grid.dim()].copy_from_slice(grid.counts());
        lower[..grid.dim()].copy_from_slice(grid.lo());
        *info = SlhjbInfo {
            dim: grid.dim(),
            controls: s.control.m(),
            nodes: grid.len(),
            counts,
            lower,
            spacing: grid.k(),
            time_step: s.spec.h,
            sweeps: s.report.sweeps,
            converged: s.report.converged,
            final_residual: s.summary.final_residual,
        };
        Ok(SlhjbStatus::Ok)
    })
}

/// Copies the value field into `buf` (`len` must equal the node count).
/// Nodes are in lexicographic order with the last axis fastest.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn slhjb_solution_values(
    solution: *const SlhjbSolution,
    buf: *mut f64,
    len: usize,
) -> SlhjbStatus {
    guard(|| {
        let s = &handle(solution)?.solved;
        let values = s.report.value.values();
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len != values.len() {
            return Err((
                SlhjbStatus::BufferSize,
                format!("expected {} values, buffer holds {len}", values.len()),
            ));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(values);
        Ok(SlhjbStatus::Ok)
    })
}

/// Copies the control field into `buf`, node-major with `controls` entries
/// per node (`len` must equal `nodes * controls`).
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn slhjb_solution_controls(
    solution: *const SlhjbSolution,
    buf: *mut f64,
    len: usize,
) -> SlhjbStatus {
    guard(|| {
        let s = &handle(solution)?.solved;
        let m = s.control.m();
        let values = s.control.values();
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len != values.len() * m {
            return Err((
                SlhjbStatus::BufferSize,
                format!("expected {} entries, buffer holds {len}", values.len() * m),
            ));
        }
        let out = std::slice::from_raw_parts_mut(buf, len);
        for (chunk, u) in out.chunks_exact_mut(m).zip(values) {
            chunk.copy_from_slice(&u[..m]);
        }
        Ok(SlhjbStatus::Ok)
    })
}

/// Feedback control at an arbitrary state `x` (`dim` entries); writes
/// `controls` entries to `u`. States outside the domain are clamped.
///
/// # Safety
/// `x` must point to `dim` doubles and `u` to `controls` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn slhjb_feedback(
    solution: *const SlhjbSolution,
    x: *const f64,
    dim: usize,
    u: *mut f64,
    controls: usize,
) -> SlhjbStatus {
    guard(|| {
        let s = &handle(solution)?.solved;
        if x.is_null() || u.is_null() {
            return Err(null("x or u"));
        }
        let (d, m) = (s.spec.grid.dim(), s.control.m());
        if dim != d || controls != m {
            return Err((
                SlhjbStatus::BufferSize,
                format!("expected a state of length {d} and a control of length {m}, got {dim} and {controls}"),
            ));
        }
        let point = slhjb::io::point(std::slice::from_raw_parts(x, dim)).map_err(fail)?;
        let control = synthesis::feedback(&s.report.value, &s.spec, &point).map_err(fail)?;
        std::slice::from_raw_parts_mut(u, m).copy_from_slice(&control[..m]);
        Ok(SlhjbStatus::Ok)
    })
}

/// Writes the configured outputs (fields and `report.json`) into `dir`.
///
/// # Safety
/// `dir` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn slhjb_write_solution(solution: *const SlhjbSolution, dir: *const c_char) -> SlhjbStatus {
    guard(|| {
        let h = handle(solution)?;
        let dir = str_arg(dir, "dir")?;
        run::write_solution(&h.config, &h.solved, Path::new(dir)).map_err(fail)?;
        Ok(SlhjbStatus::Ok)
    })
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn slhjb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn slhjb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

//! C ABI for the slevel solver.
//!
//! Every fallible function returns a [`SlevelStatus`] and moves results
//! through out parameters; [`slevel_last_error`] describes the most recent
//! failure on the calling thread. Handles are opaque: build a problem with
//! [`slevel_problem_from_toml`], run a solver with [`slevel_solve_toml`], and
//! release everything with the matching `*_free` function. All pointers are
//! borrowed for the duration of the call unless a function documents
//! otherwise; handles are not thread-safe to mutate concurrently but may be
//! shared for read-only calls.
//!
//! The C header is generated into `include/slevel.h` by the build script.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use serde::Deserialize;
use slevel::io::{solve_configured, write_metrics_csv, ProblemConfig, ReferenceConfig, SolverConfig};
use slevel::levelset::{LevelTrace, StopReason};
use slevel::problem::{Reference, SoecProblem};
use slevel::SlevelError;

/// Status code returned by every fallible API function.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlevelStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidString = 2,
    /// An argument value or buffer length was rejected.
    InvalidArgument = 3,
    /// A configuration document failed to parse or validate.
    Config = 4,
    /// Building or solving failed after the configuration was accepted.
    Runtime = 5,
    /// An index was past the end of a collection.
    OutOfRange = 6,
    /// A panic was caught at the language boundary; the handle involved is
    /// still valid but the operation had no effect.
    Panic = 7,
}

/// An immutable problem instance.
pub struct SlevelProblem {
    inner: SoecProblem,
}

/// A completed solver run: one metrics row per outer iteration plus the
/// final iterate.
pub struct SlevelTrace {
    inner: LevelTrace,
}

/// One outer iteration of a solver trace, mirroring the metrics CSV columns.
/// `relative_gap` is NaN when the run had no optimality reference.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SlevelTraceRow {
    pub outer_iter: u64,
    pub grad_iters: u64,
    pub data_passes: f64,
    pub r: f64,
    pub u_hat: f64,
    pub objective: f64,
    pub max_violation: f64,
    pub relative_gap: f64,
    pub wall_ms: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

type Failure = (SlevelStatus, String);

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR
        .with(|slot| *slot.borrow_mut() = CString::new(sanitized).expect("NUL bytes removed"));
}

/// Run one API body, translating panics and failures into status codes.
fn api_call(body: impl FnOnce() -> Result<(), Failure>) -> SlevelStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error("");
            SlevelStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_last_error(&message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "opaque panic payload".to_string());
            set_last_error(&format!("panic at the C boundary: {message}"));
            SlevelStatus::Panic
        }
    }
}

fn fail(status: SlevelStatus, message: impl Into<String>) -> Failure {
    (status, message.into())
}

fn library_failure(e: SlevelError) -> Failure {
    let status = match &e {
        SlevelError::Config(_) => SlevelStatus::Config,
        SlevelError::InvalidArgument(_) => SlevelStatus::InvalidArgument,
        _ => SlevelStatus::Runtime,
    };
    (status, e.to_string())
}

unsafe fn utf8_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(fail(SlevelStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|e| fail(SlevelStatus::InvalidString, format!("{name} is not UTF-8: {e}")))
}

unsafe fn handle_arg<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, Failure> {
    ptr.as_ref()
        .ok_or_else(|| fail(SlevelStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_arg<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut()
        .ok_or_else(|| fail(SlevelStatus::NullPointer, format!("{name} is null")))
}

fn expect_len(what: &str, got: usize, want: usize) -> Result<(), Failure> {
    if got == want {
        Ok(())
    } else {
        Err(fail(
            SlevelStatus::InvalidArgument,
            format!("{what} has length {got}, the problem needs {want}"),
        ))
    }
}

/// Library version as a static NUL-terminated string; do not free it.
#[no_mangle]
pub extern "C" fn slevel_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on the calling thread; the empty
/// string after a success. The pointer stays valid until this thread's next
/// call into the library.
#[no_mangle]
pub extern "C" fn slevel_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Build a problem instance from a TOML description: a `kind` key choosing
/// the family (`"toy-1d"`, `"toy-2d"`, `"np-multiclass"`, `"fairness"`,
/// `"alp"`) followed by that family's parameters, exactly as in the
/// `[problem]` table of a CLI run file. On success `*out_problem` owns the
/// instance; release it with [`slevel_problem_free`].
///
/// # Safety
/// `config` must be a NUL-terminated string and `out_problem` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn slevel_problem_from_toml(
    config: *const c_char,
    out_problem: *mut *mut SlevelProblem,
) -> SlevelStatus {
    api_call(|| {
        let out = out_arg(out_problem, "out_problem")?;
        let text = utf8_arg(config, "config")?;
        let parsed: ProblemConfig =
            toml::from_str(text).map_err(|e| fail(SlevelStatus::Config, e.to_string()))?;
        let inner = parsed.build().map_err(library_failure)?;
        *out = Box::into_raw(Box::new(SlevelProblem { inner }));
        Ok(())
    })
}

/// Release a problem handle; a null pointer is ignored.
///
/// # Safety
/// `problem` must have come from this library and not been freed before.
#[no_mangle]
pub unsafe extern "C" fn slevel_problem_free(problem: *mut SlevelProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Decision dimension of the problem, or 0 for a null handle.
///
/// # Safety
/// `problem` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn slevel_problem_dim(problem: *const SlevelProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.inner.dim())
}

/// Number of expectation constraints, or 0 for a null handle.
///
/// # Safety
/// `problem` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn slevel_problem_num_constraints(problem: *const SlevelProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.inner.num_constraints())
}

/// Copy the problem's canonical starting point into `out_x`, whose length
/// `len` must equal the problem dimension. Instances without a pinned start
/// report the domain's prox center.
///
/// # Safety
/// `problem` must be a live handle; `out_x` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn slevel_problem_initial_point(
    problem: *const SlevelProblem,
    out_x: *mut f64,
    len: usize,
) -> SlevelStatus {
    api_call(|| {
        let p = handle_arg(problem, "problem")?;
        if out_x.is_null() {
            return Err(fail(SlevelStatus::NullPointer, "out_x is null"));
        }
        expect_len("out_x", len, p.inner.dim())?;
        let x0 = match p.inner.initial_point() {
            Some(x) => x.to_vec(),
            None => p.inner.domain().omega_argmin(),
        };
        std::slice::from_raw_parts_mut(out_x, len).copy_from_slice(&x0);
        Ok(())
    })
}

/// Evaluate the objective and constraint components at `x` under the
/// problem's reporting policy: exact where the instance supports it,
/// otherwise a sample average seeded by `seed`. `out_values` receives
/// `1 + slevel_problem_num_constraints` entries, objective first.
///
/// # Safety
/// `problem` must be a live handle; `x` must point to `x_len` doubles and
/// `out_values` to `values_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn slevel_problem_evaluate(
    problem: *const SlevelProblem,
    x: *const f64,
    x_len: usize,
    seed: u64,
    out_values: *mut f64,
    values_len: usize,
) -> SlevelStatus {
    api_call(|| {
        let p = handle_arg(problem, "problem")?;
        if x.is_null() {
            return Err(fail(SlevelStatus::NullPointer, "x is null"));
        }
        if out_values.is_null() {
            return Err(fail(SlevelStatus::NullPointer, "out_values is null"));
        }
        expect_len("x", x_len, p.inner.dim())?;
        expect_len("out_values", values_len, 1 + p.inner.num_constraints())?;
        let point = std::slice::from_raw_parts(x, x_len);
        let mode = p.inner.metrics_mode(seed, u64::MAX);
        let values = p.inner.values(point, mode).map_err(library_failure)?;
        std::slice::from_raw_parts_mut(out_values, values_len).copy_from_slice(&values);
        Ok(())
    })
}

/// The `[solver]` table (and optional `[reference]` table) of a run file.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveDocument {
    solver: SolverConfig,
    #[serde(default)]
    reference: Option<ReferenceConfig>,
}

/// Run a solver on the problem for one seed. `config` is a TOML document
/// with a `[solver]` table in the CLI run-file schema and an optional
/// `[reference]` table (`f_star`, `baseline`) enabling the relative-gap
/// column. On success `*out_trace` owns the run history; release it with
/// [`slevel_trace_free`].
///
/// # Safety
/// `problem` must be a live handle, `config` a NUL-terminated string, and
/// `out_trace` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn slevel_solve_toml(
    problem: *const SlevelProblem,
    config: *const c_char,
    seed: u64,
    out_trace: *mut *mut SlevelTrace,
) -> SlevelStatus {
    api_call(|| {
        let out = out_arg(out_trace, "out_trace")?;
        let p = handle_arg(problem, "problem")?;
        let text = utf8_arg(config, "config")?;
        let document: SolveDocument =
            toml::from_str(text).map_err(|e| fail(SlevelStatus::Config, e.to_string()))?;
        let reference = document
            .reference
            .map(|r| Reference::new(r.f_star, r.baseline))
            .transpose()
            .map_err(library_failure)?;
        let trace = solve_configured(&p.inner, &document.solver, seed, reference.as_ref())
            .map_err(library_failure)?;
        *out = Box::into_raw(Box::new(SlevelTrace { inner: trace }));
        Ok(())
    })
}

/// Release a trace handle; a null pointer is ignored.
///
/// # Safety
/// `trace` must have come from this library and not been freed before.
#[no_mangle]
pub unsafe extern "C" fn slevel_trace_free(trace: *mut SlevelTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of outer iterations recorded, or 0 for a null handle.
///
/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn slevel_trace_len(trace: *const SlevelTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.inner.entries.len())
}

/// Whether the run halted on its optimality certificate rather than the
/// outer-iteration limit. Null handles report false.
///
/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn slevel_trace_converged(trace: *const SlevelTrace) -> bool {
    trace
        .as_ref()
        .is_some_and(|t| matches!(t.inner.stop, StopReason::Converged))
}

/// Copy row `index` (0-based) of the trace into `out_row`.
///
/// # Safety
/// `trace` must be a live handle and `out_row` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn slevel_trace_row(
    trace: *const SlevelTrace,
    index: usize,
    out_row: *mut SlevelTraceRow,
) -> SlevelStatus {
    api_call(|| {
        let t = handle_arg(trace, "trace")?;
        let out = out_arg(out_row, "out_row")?;
        let entry = t.inner.entries.get(index).ok_or_else(|| {
            fail(
                SlevelStatus::OutOfRange,
                format!("row {index} of a {}-row trace", t.inner.entries.len()),
            )
        })?;
        *out = SlevelTraceRow {
            outer_iter: entry.outer_iter as u64,
            grad_iters: entry.grad_iters,
            data_passes: entry.data_passes,
            r: entry.r,
            u_hat: entry.u_hat,
            objective: entry.metrics.objective,
            max_violation: entry.metrics.max_violation,
            relative_gap: entry.metrics.relative_gap.unwrap_or(f64::NAN),
            wall_ms: entry.wall_ms,
        };
        Ok(())
    })
}

/// Copy the final iterate into `out_x`, whose length `len` must equal the
/// problem dimension.
///
/// # Safety
/// `trace` must be a live handle; `out_x` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn slevel_trace_solution(
    trace: *const SlevelTrace,
    out_x: *mut f64,
    len: usize,
) -> SlevelStatus {
    api_call(|| {
        let t = handle_arg(trace, "trace")?;
        if out_x.is_null() {
            return Err(fail(SlevelStatus::NullPointer, "out_x is null"));
        }
        let x = &t.inner.final_entry().x;
        expect_len("out_x", len, x.len())?;
        std::slice::from_raw_parts_mut(out_x, len).copy_from_slice(x);
        Ok(())
    })
}

/// Render the trace as a metrics CSV table (same columns as the CLI's
/// per-seed files). The returned string is owned by the caller; release it
/// with [`slevel_string_free`].
///
/// # Safety
/// `trace` must be a live handle and `out_csv` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn slevel_trace_csv(
    trace: *const SlevelTrace,
    out_csv: *mut *mut c_char,
) -> SlevelStatus {
    api_call(|| {
        let t = handle_arg(trace, "trace")?;
        let out = out_arg(out_csv, "out_csv")?;
        let mut buffer = Vec::new();
        write_metrics_csv(&t.inner, &mut buffer).map_err(library_failure)?;
        let text = CString::new(buffer)
            .map_err(|e| fail(SlevelStatus::Runtime, format!("CSV held a NUL byte: {e}")))?;
        *out = text.into_raw();
        Ok(())
    })
}

/// Release a string returned by this library; a null pointer is ignored.
///
/// # Safety
/// `text` must have come from this library and not been freed before.
#[no_mangle]
pub unsafe extern "C" fn slevel_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(CString::from_raw(text));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_the_documented_statuses() {
        let (status, message) = library_failure(SlevelError::Config("bad".into()));
        assert_eq!(status, SlevelStatus::Config);
        assert!(message.contains("bad"));

        let (status, _) = library_failure(SlevelError::InvalidArgument("x".into()));
        assert_eq!(status, SlevelStatus::InvalidArgument);

        let (status, _) = library_failure(SlevelError::ExactUnavailable("f0".into()));
        assert_eq!(status, SlevelStatus::Runtime);
    }

    #[test]
    fn panics_become_a_status_with_a_message() {
        let status = api_call(|| panic!("boom {}", 42));
        assert_eq!(status, SlevelStatus::Panic);
        let message = LAST_ERROR.with(|slot| slot.borrow().to_str().unwrap().to_string());
        assert!(message.contains("boom 42"), "{message}");
    }

    #[test]
    fn interior_nul_bytes_cannot_poison_the_error_buffer() {
        set_last_error("first\0second");
        let message = LAST_ERROR.with(|slot| slot.borrow().to_str().unwrap().to_string());
        assert_eq!(message, "first second");
    }
}

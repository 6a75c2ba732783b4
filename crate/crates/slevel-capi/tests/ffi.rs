//! Drives the C ABI from Rust the way a foreign caller would: raw pointers,
//! status codes, and the thread-local error message.

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use slevel::METRICS_HEADER;
use slevel_capi::{
    slevel_last_error, slevel_problem_dim, slevel_problem_evaluate, slevel_problem_free,
    slevel_problem_from_toml, slevel_problem_initial_point, slevel_problem_num_constraints,
    slevel_solve_toml, slevel_string_free, slevel_trace_converged, slevel_trace_csv,
    slevel_trace_free, slevel_trace_len, slevel_trace_row, slevel_trace_solution, slevel_version,
    SlevelProblem, SlevelStatus, SlevelTrace, SlevelTraceRow,
};

const SOLVER: &str = r#"
[solver]
kind = "sfls"
theta = 1.25
iterations = 200
outer_limit = 30
eps_opt = 0.004
r0 = { mode = "explicit", value = 2.0 }

[reference]
f_star = 1.0
baseline = 2.0
"#;

fn last_error() -> String {
    unsafe { CStr::from_ptr(slevel_last_error()).to_string_lossy().into_owned() }
}

fn toy_problem() -> *mut SlevelProblem {
    let config = CString::new("kind = \"toy-1d\"").unwrap();
    let mut problem = ptr::null_mut();
    let status = unsafe { slevel_problem_from_toml(config.as_ptr(), &mut problem) };
    assert_eq!(status, SlevelStatus::Ok, "{}", last_error());
    assert!(!problem.is_null());
    problem
}

fn solve(problem: *const SlevelProblem, config: &str, seed: u64) -> *mut SlevelTrace {
    let config = CString::new(config).unwrap();
    let mut trace = ptr::null_mut();
    let status = unsafe { slevel_solve_toml(problem, config.as_ptr(), seed, &mut trace) };
    assert_eq!(status, SlevelStatus::Ok, "{}", last_error());
    trace
}

fn blank_row() -> SlevelTraceRow {
    SlevelTraceRow {
        outer_iter: 0,
        grad_iters: 0,
        data_passes: 0.0,
        r: 0.0,
        u_hat: 0.0,
        objective: 0.0,
        max_violation: 0.0,
        relative_gap: 0.0,
        wall_ms: 0.0,
    }
}

#[test]
fn version_is_a_static_semver_string() {
    let version = unsafe { CStr::from_ptr(slevel_version()) }.to_str().unwrap();
    assert!(version.split('.').count() >= 2, "{version}");
}

#[test]
fn problem_handles_expose_shape_and_evaluation() {
    let problem = toy_problem();
    unsafe {
        assert_eq!(slevel_problem_dim(problem), 1);
        assert_eq!(slevel_problem_num_constraints(problem), 1);

        let mut x0 = [f64::NAN];
        let status = slevel_problem_initial_point(problem, x0.as_mut_ptr(), 1);
        assert_eq!(status, SlevelStatus::Ok, "{}", last_error());
        assert_eq!(x0, [2.0]);

        // The noiseless toy evaluates exactly: f0(x) = x, f1(x) = 1 - x.
        let mut values = [f64::NAN; 2];
        let status =
            slevel_problem_evaluate(problem, x0.as_ptr(), 1, 0, values.as_mut_ptr(), 2);
        assert_eq!(status, SlevelStatus::Ok, "{}", last_error());
        assert!((values[0] - 2.0).abs() < 1e-12 && (values[1] + 1.0).abs() < 1e-12, "{values:?}");

        // After a success the error message is empty again.
        assert!(last_error().is_empty());

        let status = slevel_problem_evaluate(problem, x0.as_ptr(), 1, 0, values.as_mut_ptr(), 1);
        assert_eq!(status, SlevelStatus::InvalidArgument);
        assert!(last_error().contains("length 1"), "{}", last_error());

        slevel_problem_free(problem);
    }
}

#[test]
fn solving_yields_a_walkable_feasible_trace() {
    let problem = toy_problem();
    let trace = solve(problem, SOLVER, 7);
    unsafe {
        assert!(slevel_trace_converged(trace), "the certificate should halt this run");
        let len = slevel_trace_len(trace);
        assert!((2..=30).contains(&len), "{len} rows");

        let mut previous_r = f64::INFINITY;
        let mut row = blank_row();
        for index in 0..len {
            let status = slevel_trace_row(trace, index, &mut row);
            assert_eq!(status, SlevelStatus::Ok, "{}", last_error());
            assert_eq!(row.outer_iter, index as u64);
            assert!(row.r < previous_r, "levels must strictly decrease");
            assert!(row.max_violation <= 1e-9, "row {index}: {}", row.max_violation);
            assert!(row.relative_gap.is_finite());
            previous_r = row.r;
        }
        assert!(row.relative_gap <= 0.05, "final gap {}", row.relative_gap);

        let status = slevel_trace_row(trace, len, &mut row);
        assert_eq!(status, SlevelStatus::OutOfRange);

        let mut x = [f64::NAN];
        let status = slevel_trace_solution(trace, x.as_mut_ptr(), 1);
        assert_eq!(status, SlevelStatus::Ok, "{}", last_error());
        assert!((1.0..=2.0).contains(&x[0]), "solution {x:?}");

        let mut csv: *mut c_char = ptr::null_mut();
        let status = slevel_trace_csv(trace, &mut csv);
        assert_eq!(status, SlevelStatus::Ok, "{}", last_error());
        let text = CStr::from_ptr(csv).to_str().unwrap().to_string();
        assert!(text.starts_with(METRICS_HEADER), "{text}");
        assert_eq!(text.lines().count(), len + 1);
        slevel_string_free(csv);

        slevel_trace_free(trace);
        slevel_problem_free(problem);
    }
}

#[test]
fn runs_without_a_reference_report_nan_gaps() {
    let solver = r#"
[solver]
kind = "sfls"
iterations = 100
outer_limit = 3
r0 = { mode = "explicit", value = 2.0 }
"#;
    let problem = toy_problem();
    let trace = solve(problem, solver, 1);
    unsafe {
        assert!(!slevel_trace_converged(trace));
        assert_eq!(slevel_trace_len(trace), 3);
        let mut row = blank_row();
        assert_eq!(slevel_trace_row(trace, 2, &mut row), SlevelStatus::Ok);
        assert!(row.relative_gap.is_nan());
        slevel_trace_free(trace);
        slevel_problem_free(problem);
    }
}

#[test]
fn every_failure_path_reports_a_typed_status() {
    unsafe {
        let mut problem: *mut SlevelProblem = ptr::null_mut();

        let status = slevel_problem_from_toml(ptr::null(), &mut problem);
        assert_eq!(status, SlevelStatus::NullPointer);
        assert!(last_error().contains("config"), "{}", last_error());

        let bad_utf8 = [0xffu8, 0x00];
        let status =
            slevel_problem_from_toml(bad_utf8.as_ptr() as *const c_char, &mut problem);
        assert_eq!(status, SlevelStatus::InvalidString);

        let config = CString::new("kind = \"lp\"").unwrap();
        let status = slevel_problem_from_toml(config.as_ptr(), &mut problem);
        assert_eq!(status, SlevelStatus::Config);
        assert!(last_error().contains("lp"), "{}", last_error());
        assert!(problem.is_null(), "no handle may escape a failed constructor");

        let problem = toy_problem();
        let mut trace: *mut SlevelTrace = ptr::null_mut();
        let solver = CString::new("[solver]\nkind = \"sgd\"\niterations = 1\nouter_limit = 1\nr0 = { mode = \"explicit\", value = 2.0 }\n").unwrap();
        let status = slevel_solve_toml(problem, solver.as_ptr(), 0, &mut trace);
        assert_eq!(status, SlevelStatus::Config);
        assert!(last_error().contains("sgd"), "{}", last_error());

        // Reference validation happens before any solving.
        let solver = CString::new(format!("{SOLVER}\n").replace("f_star = 1.0", "f_star = 3.0"))
            .unwrap();
        let status = slevel_solve_toml(problem, solver.as_ptr(), 0, &mut trace);
        assert_ne!(status, SlevelStatus::Ok);
        assert!(trace.is_null());

        slevel_problem_free(problem);
    }
}

#[test]
fn null_handles_are_inert() {
    unsafe {
        assert_eq!(slevel_problem_dim(ptr::null()), 0);
        assert_eq!(slevel_problem_num_constraints(ptr::null()), 0);
        assert_eq!(slevel_trace_len(ptr::null()), 0);
        assert!(!slevel_trace_converged(ptr::null()));
        let mut row = blank_row();
        assert_eq!(slevel_trace_row(ptr::null(), 0, &mut row), SlevelStatus::NullPointer);
        // Free functions tolerate null exactly like free(3).
        slevel_problem_free(ptr::null_mut());
        slevel_trace_free(ptr::null_mut());
        slevel_string_free(ptr::null_mut());
    }
}

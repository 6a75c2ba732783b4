#ifndef SLEVEL_H
#define SLEVEL_H

/* Generated by cbindgen from the slevel-capi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible API function.
enum SlevelStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  // The call succeeded.
  SLEVEL_STATUS_OK = 0,
  // A required pointer argument was null.
  SLEVEL_STATUS_NULL_POINTER = 1,
  // A string argument was not valid UTF-8.
  SLEVEL_STATUS_INVALID_STRING = 2,
  // An argument value or buffer length was rejected.
  SLEVEL_STATUS_INVALID_ARGUMENT = 3,
  // A configuration document failed to parse or validate.
  SLEVEL_STATUS_CONFIG = 4,
  // Building or solving failed after the configuration was accepted.
  SLEVEL_STATUS_RUNTIME = 5,
  // An index was past the end of a collection.
  SLEVEL_STATUS_OUT_OF_RANGE = 6,
  // A panic was caught at the language boundary; the handle involved is
  // still valid but the operation had no effect.
  SLEVEL_STATUS_PANIC = 7,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum SlevelStatus SlevelStatus;
#else
typedef int32_t SlevelStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

// An immutable problem instance.
typedef struct SlevelProblem SlevelProblem;

// A completed solver run: one metrics row per outer iteration plus the
// final iterate.
typedef struct SlevelTrace SlevelTrace;

// One outer iteration of a solver trace, mirroring the metrics CSV columns.
// `relative_gap` is NaN when the run had no optimality reference.
typedef struct SlevelTraceRow {
  uint64_t outer_iter;
  uint64_t grad_iters;
  double data_passes;
  double r;
  double u_hat;
  double objective;
  double max_violation;
  double relative_gap;
  double wall_ms;
} SlevelTraceRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string; do not free it.
const char *slevel_version(void);

// Message for the most recent failure on the calling thread; the empty
// string after a success. The pointer stays valid until this thread's next
// call into the library.
const char *slevel_last_error(void);

// Build a problem instance from a TOML description: a `kind` key choosing
// the family (`"toy-1d"`, `"toy-2d"`, `"np-multiclass"`, `"fairness"`,
// `"alp"`) followed by that family's parameters, exactly as in the
// `[problem]` table of a CLI run file. On success `*out_problem` owns the
// instance; release it with [`slevel_problem_free`].
//
// # Safety
// `config` must be a NUL-terminated string and `out_problem` a valid
// pointer.
SlevelStatus slevel_problem_from_toml(const char *config, struct SlevelProblem **out_problem);

// Release a problem handle; a null pointer is ignored.
//
// # Safety
// `problem` must have come from this library and not been freed before.
void slevel_problem_free(struct SlevelProblem *problem);

// Decision dimension of the problem, or 0 for a null handle.
//
// # Safety
// `problem` must be a live handle or null.
size_t slevel_problem_dim(const struct SlevelProblem *problem);

// Number of expectation constraints, or 0 for a null handle.
//
// # Safety
// `problem` must be a live handle or null.
size_t slevel_problem_num_constraints(const struct SlevelProblem *problem);

// Copy the problem's canonical starting point into `out_x`, whose length
// `len` must equal the problem dimension. Instances without a pinned start
// report the domain's prox center.
//
// # Safety
// `problem` must be a live handle; `out_x` must point to `len` writable
// doubles.
SlevelStatus slevel_problem_initial_point(const struct SlevelProblem *problem,
                                          double *out_x,
                                          size_t len);

// Evaluate the objective and constraint components at `x` under the
// problem's reporting policy: exact where the instance supports it,
// otherwise a sample average seeded by `seed`. `out_values` receives
// `1 + slevel_problem_num_constraints` entries, objective first.
//
// # Safety
// `problem` must be a live handle; `x` must point to `x_len` doubles and
// `out_values` to `values_len` writable doubles.
SlevelStatus slevel_problem_evaluate(const struct SlevelProblem *problem,
                                     const double *x,
                                     size_t x_len,
                                     uint64_t seed,
                                     double *out_values,
                                     size_t values_len);

// Run a solver on the problem for one seed. `config` is a TOML document
// with a `[solver]` table in the CLI run-file schema and an optional
// `[reference]` table (`f_star`, `baseline`) enabling the relative-gap
// column. On success `*out_trace` owns the run history; release it with
// [`slevel_trace_free`].
//
// # Safety
// `problem` must be a live handle, `config` a NUL-terminated string, and
// `out_trace` a valid pointer.
SlevelStatus slevel_solve_toml(const struct SlevelProblem *problem,
                               const char *config,
                               uint64_t seed,
                               struct SlevelTrace **out_trace);

// Release a trace handle; a null pointer is ignored.
//
// # Safety
// `trace` must have come from this library and not been freed before.
void slevel_trace_free(struct SlevelTrace *trace);

// Number of outer iterations recorded, or 0 for a null handle.
//
// # Safety
// `trace` must be a live handle or null.
size_t slevel_trace_len(const struct SlevelTrace *trace);

// Whether the run halted on its optimality certificate rather than the
// outer-iteration limit. Null handles report false.
//
// # Safety
// `trace` must be a live handle or null.
bool slevel_trace_converged(const struct SlevelTrace *trace);

// Copy row `index` (0-based) of the trace into `out_row`.
//
// # Safety
// `trace` must be a live handle and `out_row` a valid pointer.
SlevelStatus slevel_trace_row(const struct SlevelTrace *trace,
                              size_t index,
                              struct SlevelTraceRow *out_row);

// Copy the final iterate into `out_x`, whose length `len` must equal the
// problem dimension.
//
// # Safety
// `trace` must be a live handle; `out_x` must point to `len` writable
// doubles.
SlevelStatus slevel_trace_solution(const struct SlevelTrace *trace, double *out_x, size_t len);

// Render the trace as a metrics CSV table (same columns as the CLI's
// per-seed files). The returned string is owned by the caller; release it
// with [`slevel_string_free`].
//
// # Safety
// `trace` must be a live handle and `out_csv` a valid pointer.
SlevelStatus slevel_trace_csv(const struct SlevelTrace *trace, char **out_csv);

// Release a string returned by this library; a null pointer is ignored.
//
// # Safety
// `text` must have come from this library and not been freed before.
void slevel_string_free(char *text);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLEVEL_H */

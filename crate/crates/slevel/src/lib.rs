//! Stochastic feasible level-set solver for convex programs with
//! expectation constraints.
//!
//! The problem class is
//!
//! ```text
//! minimize   f₀(x) = E[F₀(x, ξ₀)]
//! subject to fᵢ(x) = E[Fᵢ(x, ξᵢ)] ≤ rᵢ,  i = 1 … m,   x ∈ X,
//! ```
//!
//! with X closed and convex and every fᵢ convex. The solver tracks the root
//! of the level-set function H(r) = min_x max{f₀(x) − r, fᵢ(x) − rᵢ}: an
//! outer loop maintains a level r below which H is negative, and an online
//! validation saddle-point oracle both drives the inner minimization and
//! certifies upper/lower bounds on H(r) from the same sample stream. Levels
//! only move when the certified upper bound is safely negative, which keeps
//! every accepted iterate feasible — the defining property of the method.
//!
//! Module map:
//! - [`domain`]: feasible sets (balls, boxes, products) with exact
//!   projection and linear minimization.
//! - [`problem`]: expectation components, batch sampling, the saddle
//!   reformulation, and quality metrics.
//! - [`geometry`]: prox setup on X × Δ, theory constants, iteration bounds.
//! - [`oracle`]: the online-validation stochastic oracle and its
//!   exact-evaluation reference variant.
//! - [`levelset`]: the outer loop, the initial-bound estimator, tolerance
//!   derivation, and a deterministic subgradient baseline.
//! - [`grid`]: brute-force H(r) and f* evaluation for low-dimensional
//!   ground truth.
//! - [`problems`]: benchmark families (analytic toys, multi-class
//!   Neyman–Pearson, fairness-constrained classification, perishable
//!   inventory ALP).
//! - [`io`]: LIBSVM datasets, metrics tables, and the TOML run-file schema
//!   with solver dispatch.
//! - [`verify`]: the self-check suite behind `slevel verify`.

// Guards of the form `!(x > 0.0)` are deliberate throughout: unlike the
// rewrites clippy suggests, the negated comparison also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod levelset;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod problems;
pub mod rng;
pub mod verify;

pub use domain::DomainSpec;
pub use error::{Result, SlevelError};
pub use geometry::{Geometry, TheoryConstants};
pub use io::{
    load_run_config, parse_libsvm, read_libsvm, solve_configured, write_metrics_csv,
    write_metrics_csv_file, DatasetMatrix, RunConfig, METRICS_HEADER,
};
pub use levelset::{
    condition_diagnostics, derive_tolerances, dfls_solve, estimate_initial_bound,
    outer_iteration_bound, sfls_solve, sfls_solve_reference, ConditionDiagnostics, DflsConfig,
    EstimatorConfig, InitialBound, LevelTrace, SflsConfig, StopReason, TraceEntry,
};
pub use oracle::{run_ovsmd, run_smd, OracleConfig, OracleRun, ReferenceRun};
pub use problem::{
    compute_metrics, evaluate_p, ClosedForm, Component, EvalMode, FiniteSum, PEvaluation,
    QualityMetrics, Reference, SaddleFunction, SoecProblem,
};

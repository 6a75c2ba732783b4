//! Level-set drivers: the stochastic feasible level-set outer loop, the
//! initial upper-bound estimator, tolerance derivations, a deterministic
//! full-gradient baseline, and condition-measure diagnostics.
//!
//! The outer loop maintains a level r ≥ f* and repeatedly calls a stochastic
//! oracle for H(r) = min_x max{f₀(x) − r, fᵢ(x) − rᵢ}. Each returned upper
//! bound û < 0 certifies (with high probability) a strictly feasible iterate
//! and drives the root-finding update r ← r + û/(2θ). Because every iterate
//! comes from a level above f*, the whole solution path stays feasible —
//! the defining property of the method.

use std::time::Instant;

use crate::error::{Result, SlevelError};
use crate::grid::GridEvaluator;
use crate::linalg;
use crate::oracle::{run_ovsmd, run_smd, OracleConfig};
use crate::problem::{
    compute_metrics, evaluate_p, EvalMode, QualityMetrics, Reference, SaddleFunction, SoecProblem,
};
use crate::rng;

/// Outer-loop configuration for the stochastic solver.
#[derive(Debug, Clone)]
pub struct SflsConfig {
    /// Starting level r⁽⁰⁾, intended to satisfy r⁽⁰⁾ > f*.
    pub r0: f64,
    /// Level-update damping θ > 1.
    pub theta: f64,
    /// Maximum number of outer iterations K.
    pub outer_limit: usize,
    /// Oracle budget per outer iteration.
    pub oracle: OracleConfig,
    /// Total confidence budget δ ∈ (0, 1), split as δ⁽ᵏ⁾ = δ/2^{k+1}.
    pub delta: f64,
    /// Halt when û ≥ −ε_opt. `None` runs the full outer budget, the default
    /// operating mode.
    pub eps_opt: Option<f64>,
}

impl SflsConfig {
    pub fn new(r0: f64, theta: f64, outer_limit: usize, oracle: OracleConfig) -> Result<Self> {
        let cfg = Self { r0, theta, outer_limit, oracle, delta: 0.1, eps_opt: None };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        self.delta = delta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_eps_opt(mut self, eps_opt: f64) -> Result<Self> {
        self.eps_opt = Some(eps_opt);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.r0.is_finite() {
            return Err(SlevelError::Config(format!("starting level must be finite, got {}", self.r0)));
        }
        if !(self.theta > 1.0) || !self.theta.is_finite() {
            return Err(SlevelError::Config(format!("theta must exceed 1, got {}", self.theta)));
        }
        if self.outer_limit == 0 {
            return Err(SlevelError::Config("outer iteration limit must be ≥ 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(SlevelError::Config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if let Some(e) = self.eps_opt {
            if !(e > 0.0) || !e.is_finite() {
                return Err(SlevelError::Config(format!("eps_opt must be positive, got {e}")));
            }
        }
        self.oracle.validate()
    }
}

/// Per-iteration confidence budget δ⁽ᵏ⁾ = δ/2^{k+1}, chosen so that
/// Σ_{k≥0} δ⁽ᵏ⁾ = δ exactly.
pub fn delta_at(delta: f64, k: usize) -> f64 {
    delta / 2f64.powi(k as i32 + 1)
}

/// Level update r ← r + û/(2θ).
pub fn level_update(r: f64, u_hat: f64, theta: f64) -> f64 {
    r + u_hat / (2.0 * theta)
}

/// Halting and oracle tolerances derived from a certified upper bound
/// Ū < 0 on H(r⁽⁰⁾): ε_opt = −Ū·ε/θ and ε_A = −Ū·ε·(θ−1)/(2θ²(θ+1)).
pub fn derive_tolerances(u_bar: f64, theta: f64, epsilon: f64) -> Result<(f64, f64)> {
    if !(u_bar < 0.0) {
        return Err(SlevelError::InvalidArgument(format!(
            "tolerances need a negative certified bound on H(r⁰); got {u_bar} — rerun the \
             initial-bound estimator"
        )));
    }
    if !(theta > 1.0) {
        return Err(SlevelError::InvalidArgument(format!("theta must exceed 1, got {theta}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(SlevelError::InvalidArgument(format!(
            "relative accuracy must lie in (0, 1), got {epsilon}"
        )));
    }
    let eps_opt = -u_bar * epsilon / theta;
    let eps_a = -u_bar * epsilon * (theta - 1.0) / (2.0 * theta * theta * (theta + 1.0));
    Ok((eps_opt, eps_a))
}

/// Theoretical outer-iteration bound ⌈(2θ²/β)·ln(θ²/(βε))⌉ for condition
/// measure β ∈ (0, 1].
pub fn outer_iteration_bound(beta: f64, theta: f64, epsilon: f64) -> Result<u64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(SlevelError::InvalidArgument(format!(
            "condition measure must lie in (0, 1], got {beta}"
        )));
    }
    if !(theta > 1.0 && epsilon > 0.0) {
        return Err(SlevelError::InvalidArgument(format!(
            "need theta > 1 and epsilon > 0, got {theta} and {epsilon}"
        )));
    }
    let t2 = theta * theta;
    Ok((2.0 * t2 / beta * (t2 / (beta * epsilon)).ln()).ceil() as u64)
}

/// One recorded outer iteration.
#[derive(Debug, Clone)]
pub struct TraceEntry {
    pub outer_iter: usize,
    /// Level r⁽ᵏ⁾ at which the oracle was called.
    pub r: f64,
    /// Oracle upper bound û(r⁽ᵏ⁾) (for the deterministic baseline: the exact
    /// best P value of the inner loop).
    pub u_hat: f64,
    /// Confidence budget δ⁽ᵏ⁾ spent on this call (0 for deterministic runs).
    pub delta_k: f64,
    /// The iterate x⁽ᵏ⁾ returned by the oracle.
    pub x: Vec<f64>,
    /// Quality snapshot at x⁽ᵏ⁾ (exact when available, else fresh-stream SAA).
    pub metrics: QualityMetrics,
    /// Cumulative inner (gradient) iterations including this call.
    pub grad_iters: u64,
    /// Cumulative data passes (scenario draws ÷ dataset size).
    pub data_passes: f64,
    /// Cumulative wall-clock milliseconds.
    pub wall_ms: f64,
}

/// Why a solve stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// û ≥ −ε_opt: the level is within tolerance of f*.
    Converged,
    /// The outer-iteration budget ran out (default operating mode).
    OuterLimit,
}

/// Full outer-loop record: the solution path x⁽⁰⁾, …, x⁽ᵏ*⁾.
#[derive(Debug, Clone)]
pub struct LevelTrace {
    pub entries: Vec<TraceEntry>,
    pub stop: StopReason,
    /// Diagnostics (e.g. repeated û > 0 suggesting r⁽ᵏ⁾ < f*).
    pub warnings: Vec<String>,
}

impl LevelTrace {
    pub fn final_entry(&self) -> &TraceEntry {
        self.entries.last().expect("a trace always has at least one entry")
    }
}

/// Run the stochastic feasible level-set method.
///
/// Per outer iteration k: call the online-validation oracle at r⁽ᵏ⁾ with a
/// fresh scenario stream, record the iterate and metrics, halt if û ≥ −ε_opt
/// (when configured), else update r⁽ᵏ⁺¹⁾ = r⁽ᵏ⁾ + û/(2θ). Three consecutive
/// û > 0 record a warning that the level likely sits below f*.
pub fn sfls_solve(
    problem: &SoecProblem,
    config: &SflsConfig,
    seed: u64,
    reference: Option<&Reference>,
) -> Result<LevelTrace> {
    sfls_core(problem, config, seed, reference, |saddle, oracle, call_seed| {
        let run = run_ovsmd(saddle, oracle, call_seed)?;
        Ok((run.upper, run.x_bar, run.scenarios))
    })
}

/// Run the outer loop with the reference oracle: the exact level-set value
/// P(r⁽ᵏ⁾, x̄) replaces the online upper certificate. Requires exact
/// component evaluators; useful for isolating the cost of online validation.
pub fn sfls_solve_reference(
    problem: &SoecProblem,
    config: &SflsConfig,
    seed: u64,
    reference: Option<&Reference>,
) -> Result<LevelTrace> {
    if !problem.has_exact() {
        return Err(SlevelError::ExactUnavailable(
            "the reference oracle needs exact component evaluators".into(),
        ));
    }
    sfls_core(problem, config, seed, reference, |saddle, oracle, call_seed| {
        let run = run_smd(saddle, oracle, call_seed)?;
        Ok((run.upper, run.x_bar, run.scenarios))
    })
}

fn sfls_core(
    problem: &SoecProblem,
    config: &SflsConfig,
    seed: u64,
    reference: Option<&Reference>,
    oracle: impl Fn(&SaddleFunction, &OracleConfig, u64) -> Result<(f64, Vec<f64>, u64)>,
) -> Result<LevelTrace> {
    config.validate()?;
    let start = Instant::now();
    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    let mut stop = StopReason::OuterLimit;
    let mut r = config.r0;
    let mut grad_iters = 0u64;
    let mut scenarios = 0u64;
    let mut positive_streak = 0usize;

    for k in 0..config.outer_limit {
        let saddle = SaddleFunction::new(problem, r);
        let call_seed = rng::mix3(seed, rng::salt::ORACLE, k as u64);
        let (upper, x_bar, run_scenarios) =
            oracle(&saddle, &config.oracle, call_seed).map_err(|e| {
                SlevelError::Invariant(format!("oracle failed at outer iteration {k}: {e}"))
            })?;
        grad_iters += config.oracle.iterations as u64;
        scenarios += run_scenarios;

        let metrics_mode = problem.metrics_mode(seed, k as u64);
        let metrics = compute_metrics(problem, &x_bar, metrics_mode, reference)?;
        entries.push(TraceEntry {
            outer_iter: k,
            r,
            u_hat: upper,
            delta_k: delta_at(config.delta, k),
            x: x_bar,
            metrics,
            grad_iters,
            data_passes: scenarios as f64 / problem.dataset_size(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });

        if upper > 0.0 {
            positive_streak += 1;
            if positive_streak == 3 {
                warnings.push(format!(
                    "upper bound stayed positive for 3 consecutive outer iterations \
                     (through k = {k}); the level likely sits below the optimal value"
                ));
            }
        } else {
            positive_streak = 0;
        }

        if let Some(eps_opt) = config.eps_opt {
            if upper >= -eps_opt {
                stop = StopReason::Converged;
                break;
            }
        }
        r = level_update(r, upper, config.theta);
    }

    Ok(LevelTrace { entries, stop, warnings })
}

/// Initial-bound estimator configuration.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    /// Oracle settings for round h = 0; later rounds grow the iteration
    /// count ×4 per halving (matching the 1/√T certificate rate), capped at
    /// `max_iterations`.
    pub oracle: OracleConfig,
    /// Starting accuracy ᾱ; round h targets α⁽ʰ⁾ = ᾱ/2^h.
    pub base_alpha: f64,
    /// Acceptance ratio θ > 1 for the stop rule.
    pub theta: f64,
    /// Total confidence budget, split as δ⁽ʰ⁾ = δ/2^{h+1}.
    pub delta: f64,
    /// Halving rounds before giving up.
    pub max_halvings: u32,
    /// Cap on the grown per-round iteration count.
    pub max_iterations: usize,
}

impl EstimatorConfig {
    pub fn new(oracle: OracleConfig, base_alpha: f64, theta: f64) -> Result<Self> {
        let cfg = Self {
            oracle,
            base_alpha,
            theta,
            delta: 0.1,
            max_halvings: 40,
            max_iterations: 1 << 20,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_alpha > 0.0 && self.base_alpha.is_finite()) {
            return Err(SlevelError::Config(format!(
                "base accuracy must be positive, got {}",
                self.base_alpha
            )));
        }
        if !(self.theta > 1.0) {
            return Err(SlevelError::Config(format!("theta must exceed 1, got {}", self.theta)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(SlevelError::Config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.max_iterations == 0 || self.max_halvings == 0 {
            return Err(SlevelError::Config("estimator caps must be positive".into()));
        }
        self.oracle.validate()
    }
}

/// A certified negative upper bound on H(r⁽⁰⁾).
#[derive(Debug, Clone)]
pub struct InitialBound {
    /// Ū = û + α < 0.
    pub u_bar: f64,
    /// The oracle estimate û of the accepted round.
    pub u_hat: f64,
    /// The accuracy α⁽ʰ⁾ of the accepted round.
    pub alpha: f64,
    /// Accepted halving round h.
    pub halvings: u32,
    /// Confidence budget δ⁽ʰ⁾ of the accepted round.
    pub delta_h: f64,
    /// Total scenario draws across all rounds.
    pub scenarios: u64,
}

/// Stop rule of the estimator: accept (û, α) when û + α < 0 and
/// (û − α)/(û + α) ≤ θ, i.e. the interval is strictly negative and its
/// endpoints agree within ratio θ.
pub fn estimator_accepts(u_hat: f64, alpha: f64, theta: f64) -> bool {
    u_hat + alpha < 0.0 && (u_hat - alpha) / (u_hat + alpha) <= theta
}

/// Estimate a certified upper bound Ū < 0 on H(r0) by running the oracle at
/// geometrically tightening accuracies α⁽ʰ⁾ = ᾱ/2^h until the stop rule
/// accepts. Errors with the halving-cap diagnostic when no negative
/// certificate emerges — the typical cause is r0 ≤ f*, where H(r0) ≥ 0.
pub fn estimate_initial_bound(
    problem: &SoecProblem,
    r0: f64,
    config: &EstimatorConfig,
    seed: u64,
) -> Result<InitialBound> {
    config.validate()?;
    let saddle = SaddleFunction::new(problem, r0);
    let mut scenarios = 0u64;
    let mut last_upper = f64::NAN;
    for h in 0..=config.max_halvings {
        let alpha = config.base_alpha / 2f64.powi(h as i32);
        let delta_h = delta_at(config.delta, h as usize);
        let iterations = config
            .oracle
            .iterations
            .saturating_mul(4usize.saturating_pow(h))
            .min(config.max_iterations);
        let round = OracleConfig { iterations, ..config.oracle.clone() };
        let run = run_ovsmd(&saddle, &round, rng::mix3(seed, rng::salt::ESTIMATE, h as u64))?;
        scenarios += run.scenarios;
        last_upper = run.upper;
        if estimator_accepts(run.upper, alpha, config.theta) {
            return Ok(InitialBound {
                u_bar: run.upper + alpha,
                u_hat: run.upper,
                alpha,
                halvings: h,
                delta_h,
                scenarios,
            });
        }
    }
    Err(SlevelError::BoundEstimateCap { halvings: config.max_halvings, last_upper })
}

/// Deterministic baseline configuration: full-gradient projected subgradient
/// descent on P(r, ·) inside, level update r ← r + P(r, x⁽ᵏ⁾)/2 outside.
#[derive(Debug, Clone)]
pub struct DflsConfig {
    pub r0: f64,
    pub outer_limit: usize,
    /// Inner subgradient iterations per outer step.
    pub inner_iterations: usize,
    /// Step constant c in γₜ = 1/(c·√(t+1)) (reset each outer step).
    pub step_constant: f64,
    /// Halt when the best P value ≥ −ε_opt.
    pub eps_opt: Option<f64>,
}

impl DflsConfig {
    pub fn new(r0: f64, outer_limit: usize, inner_iterations: usize, step_constant: f64) -> Result<Self> {
        let cfg = Self { r0, outer_limit, inner_iterations, step_constant, eps_opt: None };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_eps_opt(mut self, eps_opt: f64) -> Result<Self> {
        self.eps_opt = Some(eps_opt);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.r0.is_finite() {
            return Err(SlevelError::Config(format!("starting level must be finite, got {}", self.r0)));
        }
        if self.outer_limit == 0 || self.inner_iterations == 0 {
            return Err(SlevelError::Config("iteration limits must be ≥ 1".into()));
        }
        if !(self.step_constant > 0.0 && self.step_constant.is_finite()) {
            return Err(SlevelError::Config(format!(
                "step constant must be positive, got {}",
                self.step_constant
            )));
        }
        if let Some(e) = self.eps_opt {
            if !(e > 0.0) {
                return Err(SlevelError::Config(format!("eps_opt must be positive, got {e}")));
            }
        }
        Ok(())
    }
}

/// Run the deterministic feasible level-set baseline. Requires exact
/// component evaluators (full-data subgradients). Each inner iteration
/// evaluates P exactly, takes a subgradient of the max-active component
/// (lowest index on ties), and projects; it is charged two data passes. The
/// inner loop warm-starts at the previous outer iterate and returns its
/// best-P point.
pub fn dfls_solve(
    problem: &SoecProblem,
    config: &DflsConfig,
    reference: Option<&Reference>,
) -> Result<LevelTrace> {
    config.validate()?;
    if !problem.has_exact() {
        return Err(SlevelError::Unsupported(format!(
            "the deterministic baseline needs exact evaluators; '{}' samples only",
            problem.name()
        )));
    }
    let start = Instant::now();
    let domain = problem.domain();
    let mut x_warm = match problem.initial_point() {
        Some(x) => x.to_vec(),
        None => domain.omega_argmin(),
    };
    domain.project(&mut x_warm);

    let mut entries = Vec::new();
    let mut stop = StopReason::OuterLimit;
    let mut r = config.r0;
    let mut grad_iters = 0u64;
    let mut data_passes = 0.0f64;
    let mut grad = vec![0.0; problem.dim()];

    for k in 0..config.outer_limit {
        let mut x = x_warm.clone();
        let mut best_value = f64::INFINITY;
        let mut best_x = x.clone();
        for t in 0..config.inner_iterations {
            let eval = evaluate_p(problem, r, &x, EvalMode::Exact)?;
            if eval.value < best_value {
                best_value = eval.value;
                best_x.copy_from_slice(&x);
            }
            grad.fill(0.0);
            problem.component_exact(eval.argmax, &x, 1.0, &mut grad)?;
            let gamma = crate::oracle::step_size(config.step_constant, t);
            linalg::axpy(-gamma, &grad, &mut x);
            domain.project(&mut x);
            grad_iters += 1;
            data_passes += 2.0;
            if !linalg::all_finite(&x) {
                return Err(SlevelError::NonFiniteIterate { iteration: t as u64 });
            }
        }

        let metrics = compute_metrics(problem, &best_x, EvalMode::Exact, reference)?;
        entries.push(TraceEntry {
            outer_iter: k,
            r,
            u_hat: best_value,
            delta_k: 0.0,
            x: best_x.clone(),
            metrics,
            grad_iters,
            data_passes,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });

        if let Some(eps_opt) = config.eps_opt {
            if best_value >= -eps_opt {
                stop = StopReason::Converged;
                break;
            }
        }
        r += best_value / 2.0;
        x_warm = best_x;
    }

    Ok(LevelTrace { entries, stop, warnings: Vec::new() })
}

/// Condition-measure diagnostics from the grid evaluator (dimension ≤ 3).
#[derive(Debug, Clone)]
pub struct ConditionDiagnostics {
    /// Measured H(r⁰).
    pub h_r0: f64,
    /// Root of H located by bisection: the optimal value f*.
    pub f_star: f64,
    /// β̂ = −H(r⁰)/(r⁰ − f*) ∈ (0, 1] up to grid error.
    pub beta_hat: f64,
    /// ⌈(2θ²/β̂)·ln(θ²/(β̂ε))⌉, the theoretical outer-iteration bound.
    pub outer_bound: u64,
}

/// Measure the condition number β of a low-dimensional problem at r0 and
/// report the induced outer-iteration bound for accuracy ε and step θ.
pub fn condition_diagnostics(
    problem: &SoecProblem,
    r0: f64,
    grid_resolution: usize,
    theta: f64,
    epsilon: f64,
) -> Result<ConditionDiagnostics> {
    let evaluator = GridEvaluator::new(problem, EvalMode::Exact, grid_resolution)?;
    let h_r0 = evaluator.level_value(r0)?.value;
    if !(h_r0 < 0.0) {
        return Err(SlevelError::InvalidArgument(format!(
            "H(r0) = {h_r0} is not negative; the starting level must exceed f*"
        )));
    }
    // Walk the level down until H turns positive to bracket the root.
    let mut lo = r0;
    let mut width = 1.0 + r0.abs();
    let mut bracketed = false;
    for _ in 0..60 {
        lo -= width;
        width *= 2.0;
        if evaluator.level_value(lo)?.value > 0.0 {
            bracketed = true;
            break;
        }
    }
    if !bracketed {
        return Err(SlevelError::RootNotBracketed(format!(
            "H stayed non-positive down to level {lo}"
        )));
    }
    let f_star = evaluator.optimal_value(lo, r0, 1e-7)?;
    let beta_hat = -h_r0 / (r0 - f_star);
    let outer_bound = outer_iteration_bound(beta_hat.min(1.0), theta, epsilon)?;
    Ok(ConditionDiagnostics { h_r0, f_star, beta_hat, outer_bound })
}

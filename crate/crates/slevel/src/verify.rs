//! Built-in verification suite behind `slevel verify`.
//!
//! Each criterion is a reduced-scale property check of one advertised
//! guarantee — level-set structure, prox correctness, oracle certificates and
//! rate, feasible solution paths, the initial-bound estimator, the benchmark
//! families, the worked constant formulas, and the dataset parser. The quick
//! level runs the deterministic desk-scale checks; the full level adds the
//! seed sweeps, the rate-slope fit, and the benchmark comparisons.

use std::fmt;
use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domain::DomainSpec;
use crate::error::{Result, SlevelError};
use crate::geometry::{
    self, iteration_bound_t_with_omega, iteration_bound_w_with_omega, omega_factor, Geometry,
    TheoryConstants,
};
use crate::grid::GridEvaluator;
use crate::io::libsvm::parse_libsvm;
use crate::levelset::{
    condition_diagnostics, derive_tolerances, dfls_solve, estimate_initial_bound, sfls_solve,
    DflsConfig, EstimatorConfig, SflsConfig, StopReason,
};
use crate::linalg;
use crate::oracle::{run_ovsmd, OracleConfig};
use crate::problem::{evaluate_p, EvalMode, Reference, SaddleFunction};
use crate::problems::{
    build_alp, build_fairness, build_np_multiclass, build_toy, AlpSpec, FairnessSpec,
    MulticlassNpSpec, PerishableMdpSpec, ToyVariant,
};

/// How much of the suite to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyLevel {
    /// Deterministic desk-scale checks (~1 minute).
    Quick,
    /// Everything, including seed sweeps and the benchmark comparisons.
    Full,
}

impl VerifyLevel {
    /// Criterion ids exercised at this level, in execution order.
    pub fn criteria(self) -> &'static [usize] {
        match self {
            VerifyLevel::Quick => &[1, 2, 3, 5, 7, 9, 11, 12],
            VerifyLevel::Full => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12],
        }
    }
}

/// Result of one criterion run.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    /// Pass: headline numbers. Fail: the first violated condition.
    pub detail: String,
    pub wall_ms: f64,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:02} {:<24} {} ({:.0} ms) {}",
            self.id,
            self.name,
            if self.passed { "pass" } else { "FAIL" },
            self.wall_ms,
            self.detail
        )
    }
}

/// A criterion body: `Ok` carries headline numbers, `Err` the violation.
type Check = std::result::Result<String, String>;

/// Attach context to solver errors inside a criterion body.
trait OrFail<T> {
    fn or_fail(self, what: &str) -> std::result::Result<T, String>;
}

impl<T> OrFail<T> for Result<T> {
    fn or_fail(self, what: &str) -> std::result::Result<T, String> {
        self.map_err(|e| format!("{what}: {e}"))
    }
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

type Criterion = (usize, &'static str, fn() -> Check);

const CRITERIA: [Criterion; 12] = [
    (1, "level-function-structure", level_function_structure),
    (2, "prox-mappings", prox_mappings),
    (3, "oracle-bound-sandwich", oracle_bound_sandwich),
    (4, "oracle-rate-slope", oracle_rate_slope),
    (5, "sfls-toy-convergence", sfls_toy_convergence),
    (6, "noisy-feasible-path", noisy_feasible_path),
    (7, "initial-bound-estimator", initial_bound_estimator),
    (8, "np-data-complexity", np_data_complexity),
    (9, "fairness-at-init", fairness_at_init),
    (10, "alp-reduced-scale", alp_reduced_scale),
    (11, "worked-constants", worked_constants),
    (12, "libsvm-round-trip", libsvm_round_trip),
];

/// Run a single criterion by id (1–12). Panics on an unknown id, which is a
/// programming error — callers should iterate `VerifyLevel::criteria`.
pub fn run_criterion(id: usize) -> CheckOutcome {
    let (name, body) = CRITERIA
        .iter()
        .find(|(cid, _, _)| *cid == id)
        .map(|(_, name, body)| (*name, *body))
        .unwrap_or_else(|| panic!("unknown criterion id {id}"));
    let start = Instant::now();
    let result = body();
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    match result {
        Ok(detail) => CheckOutcome { id, name, passed: true, detail, wall_ms },
        Err(detail) => CheckOutcome { id, name, passed: false, detail, wall_ms },
    }
}

/// Run every criterion of the level, in order, never short-circuiting.
pub fn run_suite(level: VerifyLevel) -> Vec<CheckOutcome> {
    level.criteria().iter().map(|&id| run_criterion(id)).collect()
}

// --- criterion 1 ------------------------------------------------------------

/// Level-set structure on one analytic toy: H non-increasing over 20 levels,
/// |H(f*)| ≤ 1e-3, and strictly signed on both sides of the root.
fn check_level_function(variant: ToyVariant, resolution: usize) -> Check {
    let p = build_toy(variant, 0.0).or_fail("build toy")?;
    let d = condition_diagnostics(&p, 2.0, resolution, 1.25, 0.01).or_fail("diagnostics")?;
    let ev = GridEvaluator::new(&p, EvalMode::Exact, resolution).or_fail("grid")?;

    let (lo, hi) = (d.f_star - 0.5, 2.0);
    let mut prev = f64::INFINITY;
    for i in 0..20 {
        let r = lo + (hi - lo) * i as f64 / 19.0;
        let h = ev.level_value(r).or_fail("grid H")?.value;
        ensure!(
            h <= prev + 1e-6,
            "{}: H({r:.4}) = {h:.6} rose above the previous value {prev:.6}",
            p.name()
        );
        prev = h;
    }

    let h_root = ev.level_value(d.f_star).or_fail("grid H at f*")?.value;
    ensure!(
        h_root.abs() <= 1e-3,
        "{}: |H(f*)| = {:.2e} exceeds 1e-3 at f* = {:.6}",
        p.name(),
        h_root.abs(),
        d.f_star
    );
    for off in [0.25, 0.5] {
        let below = ev.level_value(d.f_star - off).or_fail("grid H below f*")?.value;
        let above = ev.level_value(d.f_star + off).or_fail("grid H above f*")?.value;
        ensure!(below > 0.0, "{}: H(f* − {off}) = {below:.6} is not positive", p.name());
        ensure!(above < 0.0, "{}: H(f* + {off}) = {above:.6} is not negative", p.name());
    }
    Ok(format!("{}: f* = {:.6}, beta = {:.4}", p.name(), d.f_star, d.beta_hat))
}

fn level_function_structure() -> Check {
    let one = check_level_function(ToyVariant::OneD, 41)?;
    let two = check_level_function(ToyVariant::TwoD, 61)?;
    Ok(format!("{one}; {two}"))
}

// --- criterion 2 ------------------------------------------------------------

/// Entropy prox against a coarse-to-fine grid search on the 2-point simplex,
/// and Euclidean projection idempotence/nonexpansiveness on random pairs.
fn prox_mappings() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);

    // g(t) = ζ·u + KL(u ‖ y) over u = (t, 1−t); strictly convex in t, so the
    // refined bracket always contains the argmin.
    for case in 0..100 {
        let y0 = rng.random_range(0.02..0.98);
        let y = [y0, 1.0 - y0];
        let zeta = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let mut prox = y;
        geometry::prox_entropy_simplex(&mut prox, &zeta);

        let objective = |t: f64| {
            zeta[0] * t
                + zeta[1] * (1.0 - t)
                + t * (t / y[0]).ln()
                + (1.0 - t) * ((1.0 - t) / y[1]).ln()
        };
        let (mut lo, mut hi) = (1e-9, 1.0 - 1e-9);
        let mut best_t = 0.5;
        for _ in 0..4 {
            let mut best = f64::INFINITY;
            for i in 0..=1000 {
                let t = lo + (hi - lo) * i as f64 / 1000.0;
                let g = objective(t);
                if g < best {
                    best = g;
                    best_t = t;
                }
            }
            let width = (hi - lo) / 1000.0;
            lo = (best_t - 2.0 * width).max(1e-9);
            hi = (best_t + 2.0 * width).min(1.0 - 1e-9);
        }
        ensure!(
            (prox[0] - best_t).abs() <= 1e-4,
            "case {case}: prox gives y₀ = {:.8}, grid search {:.8} (y = {y:?}, zeta = {zeta:?})",
            prox[0],
            best_t
        );
    }

    let domains = [
        DomainSpec::centered_ball(3, 2.0).or_fail("ball domain")?,
        DomainSpec::r#box(vec![-1.0, 0.0], vec![2.0, 5.0]).or_fail("box domain")?,
        DomainSpec::product(vec![
            DomainSpec::interval(0.0, 1.0).or_fail("interval factor")?,
            DomainSpec::centered_ball(2, 1.5).or_fail("ball factor")?,
        ])
        .or_fail("product domain")?,
    ];
    let mut pairs = 0usize;
    for domain in &domains {
        let dim = domain.dim();
        for _ in 0..334 {
            let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-6.0..6.0)).collect();
            let b: Vec<f64> = (0..dim).map(|_| rng.random_range(-6.0..6.0)).collect();
            let mut pa = a.clone();
            domain.project(&mut pa);
            let mut pb = b.clone();
            domain.project(&mut pb);
            let mut paa = pa.clone();
            domain.project(&mut paa);
            let drift = linalg::dist2_sq(&pa, &paa).sqrt();
            ensure!(drift <= 1e-12, "projection moved an already-projected point by {drift:.2e}");
            ensure!(domain.contains(&pa, 1e-9), "projected point left the domain: {pa:?}");
            let d_proj = linalg::dist2_sq(&pa, &pb).sqrt();
            let d_orig = linalg::dist2_sq(&a, &b).sqrt();
            ensure!(
                d_proj <= d_orig + 1e-12,
                "projection expanded a pair: {d_proj:.12} > {d_orig:.12}"
            );
            pairs += 1;
        }
    }
    Ok(format!("100 prox cases within 1e-4; {pairs} projection pairs checked"))
}

// --- criterion 3 ------------------------------------------------------------

/// Zero-noise sandwich: every step of the online certificates brackets the
/// grid H(2) = −0.5, and û dominates the exact P(r, x̄) at every step.
fn oracle_bound_sandwich() -> Check {
    let p = build_toy(ToyVariant::OneD, 0.0).or_fail("build toy")?;
    let ev = GridEvaluator::new(&p, EvalMode::Exact, 4097).or_fail("grid")?;
    let h = ev.level_value(2.0).or_fail("grid H(2)")?.value;
    ensure!((h + 0.5).abs() <= 1e-6, "grid H(2) = {h:.8} is far from −0.5");

    let saddle = SaddleFunction::new(&p, 2.0);
    let config = OracleConfig::new(2000, 1.0).or_fail("oracle config")?.with_recording();
    let run = run_ovsmd(&saddle, &config, 17).or_fail("oracle run")?;
    let trajectory = run
        .trajectory
        .as_ref()
        .ok_or_else(|| "recording was requested but no trajectory came back".to_string())?;
    ensure!(trajectory.len() == 2000, "expected 2000 recorded steps, got {}", trajectory.len());

    for point in trajectory {
        ensure!(
            point.lower <= h + 1e-3,
            "step {}: l̂ = {:.6} exceeds H(2) = {h:.6} beyond tolerance",
            point.step,
            point.lower
        );
        ensure!(
            point.upper >= h - 1e-3,
            "step {}: û = {:.6} fell below H(2) = {h:.6} beyond tolerance",
            point.step,
            point.upper
        );
        let p_val = evaluate_p(&p, 2.0, &point.x_bar, EvalMode::Exact)
            .or_fail("exact P at x̄")?
            .value;
        ensure!(
            point.upper >= p_val - 1e-9,
            "step {}: û = {:.9} fell below P(2, x̄) = {p_val:.9}",
            point.step,
            point.upper
        );
    }
    Ok(format!(
        "2000 steps bracketed H(2) = {h:.4}: final û = {:.5}, l̂ = {:.5}",
        run.upper, run.lower
    ))
}

// --- criterion 4 ------------------------------------------------------------

fn fitted_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    num / den
}

/// The certificate gap û − l̂ shrinks like T^(−1/2) up to logs: the fitted
/// log-log slope over T ∈ {100, 400, 1600, 6400} must sit in [−0.65, −0.35].
fn oracle_rate_slope() -> Check {
    let p = build_toy(ToyVariant::OneD, 0.0).or_fail("build toy")?;
    let saddle = SaddleFunction::new(&p, 2.0);
    let mut points = Vec::new();
    let mut gaps = String::new();
    for t in [100usize, 400, 1600, 6400] {
        let config = OracleConfig::new(t, 1.0).or_fail("oracle config")?;
        let run = run_ovsmd(&saddle, &config, 29).or_fail("oracle run")?;
        let gap = run.upper - run.lower;
        ensure!(gap > 0.0, "T = {t}: certificate gap {gap:.3e} is not positive");
        write!(gaps, " {gap:.4}").expect("writing to a string cannot fail");
        points.push(((t as f64).ln(), gap.ln()));
    }
    let slope = fitted_slope(&points);
    ensure!(
        (-0.65..=-0.35).contains(&slope),
        "fitted slope {slope:.4} outside [−0.65, −0.35] (gaps{gaps})"
    );
    Ok(format!("slope {slope:.4}, gaps{gaps}"))
}

// --- criterion 5 ------------------------------------------------------------

/// Zero-noise convergence on one toy: feasible at every outer iterate, final
/// relative gap ≤ 1%, and the outer count within the measured-β bound + 2.
fn check_sfls_toy(variant: ToyVariant, resolution: usize) -> Check {
    let p = build_toy(variant, 0.0).or_fail("build toy")?;
    let d = condition_diagnostics(&p, 2.0, resolution, 1.25, 0.01).or_fail("diagnostics")?;
    let (eps_opt, _) = derive_tolerances(d.h_r0, 1.25, 0.01).or_fail("tolerances")?;
    let limit = d.outer_bound as usize + 2;
    let oracle = OracleConfig::new(2000, 1.0).or_fail("oracle config")?;
    let config = SflsConfig::new(2.0, 1.25, limit, oracle)
        .or_fail("sfls config")?
        .with_eps_opt(eps_opt)
        .or_fail("sfls eps_opt")?;
    let reference = Reference::new(d.f_star, 2.0).or_fail("reference")?;
    let trace = sfls_solve(&p, &config, 5, Some(&reference)).or_fail("sfls solve")?;

    ensure!(
        trace.stop == StopReason::Converged,
        "{}: no convergence within the bound {} + 2 outer iterations",
        p.name(),
        d.outer_bound
    );
    for e in &trace.entries {
        ensure!(
            e.metrics.max_violation <= 1e-9,
            "{}: outer {} violates a constraint by {:.3e}",
            p.name(),
            e.outer_iter,
            e.metrics.max_violation
        );
    }
    let last = trace.final_entry();
    let gap = last
        .metrics
        .relative_gap
        .ok_or_else(|| "the trace carries no relative gap".to_string())?;
    ensure!(gap <= 0.01, "{}: final relative gap {gap:.5} exceeds 0.01", p.name());
    Ok(format!(
        "{}: {} outers (bound {}), final gap {:.5}",
        p.name(),
        trace.entries.len(),
        d.outer_bound,
        gap
    ))
}

fn sfls_toy_convergence() -> Check {
    let one = check_sfls_toy(ToyVariant::OneD, 41)?;
    let two = check_sfls_toy(ToyVariant::TwoD, 61)?;
    Ok(format!("{one}; {two}"))
}

// --- criterion 6 ------------------------------------------------------------

/// Feasible solution path under ±0.5 uniform observation noise: at least 90%
/// of 50 seeds keep every outer iterate exactly feasible.
fn noisy_feasible_path() -> Check {
    let p = build_toy(ToyVariant::OneD, 0.5).or_fail("build noisy toy")?;
    let oracle = OracleConfig::new(500, 1.0)
        .or_fail("oracle config")?
        .with_batch(16)
        .or_fail("oracle batch")?;
    let config = SflsConfig::new(2.0, 1.25, 20, oracle)
        .or_fail("sfls config")?
        .with_delta(0.1)
        .or_fail("sfls delta")?;
    let verdicts: Vec<bool> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let trace = sfls_solve(&p, &config, seed, None)?;
            Ok(trace.entries.iter().all(|e| e.metrics.max_violation <= 0.0))
        })
        .collect::<Result<_>>()
        .or_fail("seed sweep")?;
    let feasible = verdicts.iter().filter(|ok| **ok).count();
    ensure!(feasible >= 45, "only {feasible}/50 seeds kept a feasible path (need ≥ 45)");
    Ok(format!("{feasible}/50 seeds kept an exactly feasible path"))
}

// --- criterion 7 ------------------------------------------------------------

/// The initial-bound estimator certifies −0.5 ≤ Ū < 0 with ratio ≤ θ at
/// r0 = 2, and trips the halving cap with its diagnostic at r0 = f*.
fn initial_bound_estimator() -> Check {
    let p = build_toy(ToyVariant::OneD, 0.0).or_fail("build toy")?;
    let oracle = OracleConfig::new(100, 1.0).or_fail("oracle config")?;
    let config = EstimatorConfig::new(oracle, 0.1, 1.1).or_fail("estimator config")?;
    let bound = estimate_initial_bound(&p, 2.0, &config, 7).or_fail("estimate at r0 = 2")?;
    ensure!(bound.u_bar < 0.0, "Ū = {:.6} is not negative", bound.u_bar);
    ensure!(bound.u_bar >= -0.5 - 1e-9, "Ū = {:.6} overshoots H(2) = −0.5", bound.u_bar);
    let ratio = 0.5 / bound.u_bar.abs();
    ensure!(ratio <= 1.1 + 1e-12, "|H(2)|/|Ū| = {ratio:.4} exceeds θ = 1.1");

    let mut cap_config = EstimatorConfig::new(OracleConfig::new(50, 1.0).or_fail("oracle")?, 0.1, 1.1)
        .or_fail("estimator config")?;
    cap_config.max_halvings = 6;
    cap_config.max_iterations = 2000;
    let diagnostic = match estimate_initial_bound(&p, 1.0, &cap_config, 7) {
        Err(SlevelError::BoundEstimateCap { halvings, last_upper }) => {
            ensure!(halvings == 6, "cap tripped after {halvings} halvings, expected 6");
            format!("cap at r0 = f* after {halvings} halvings (last û = {last_upper:.4})")
        }
        Ok(b) => return Err(format!("estimator certified Ū = {:.6} at the root level", b.u_bar)),
        Err(other) => return Err(format!("wrong diagnostic at the root level: {other}")),
    };
    Ok(format!(
        "Ū = {:.5} after {} halvings, ratio {ratio:.4}; {diagnostic}",
        bound.u_bar, bound.halvings
    ))
}

// --- criterion 8 ------------------------------------------------------------

/// Multi-class Neyman-Pearson data-complexity comparison: with a matched
/// 50-data-pass budget, SFLS reaches a relative gap no worse than DFLS, and
/// both solution paths stay exactly feasible.
fn np_data_complexity() -> Check {
    let spec = MulticlassNpSpec::synthetic_gaussians(3, 1000, 2, 2.0, 5.0, 21);
    let p = build_np_multiclass(&spec).or_fail("build instance")?;

    // f* from a 10×-budget reference run: 250 inner iterations = 500 passes.
    let reference_cfg = DflsConfig::new(2.0, 10, 25, 1.0).or_fail("reference config")?;
    let reference_trace = dfls_solve(&p, &reference_cfg, None).or_fail("reference run")?;
    let last = reference_trace.final_entry();
    let f_star = last.r + last.u_hat / 2.0;
    ensure!(
        f_star < 2.0,
        "reference run puts f* at {f_star:.4}, not below the baseline level 2"
    );
    let reference = Reference::new(f_star, 2.0).or_fail("reference")?;

    // Matched budget: 10 outers × (100 steps × batch 50 × 3 components) and
    // 5 outers × 5 inner × 2 passes are both 50 passes over 3000 points.
    let oracle = OracleConfig::new(100, 1.0)
        .or_fail("oracle config")?
        .with_batch(50)
        .or_fail("oracle batch")?;
    let sfls_cfg = SflsConfig::new(2.0, 1.25, 10, oracle).or_fail("sfls config")?;
    let sfls = sfls_solve(&p, &sfls_cfg, 13, Some(&reference)).or_fail("sfls run")?;
    let dfls_cfg = DflsConfig::new(2.0, 5, 5, 1.0).or_fail("dfls config")?;
    let dfls = dfls_solve(&p, &dfls_cfg, Some(&reference)).or_fail("dfls run")?;

    for (trace, method) in [(&sfls, "sfls"), (&dfls, "dfls")] {
        let passes = trace.final_entry().data_passes;
        ensure!(passes <= 50.0 + 1e-9, "{method} spent {passes:.2} data passes, budget is 50");
        for e in &trace.entries {
            ensure!(
                e.metrics.max_violation <= 1e-8,
                "{method}: outer {} violates a constraint by {:.3e}",
                e.outer_iter,
                e.metrics.max_violation
            );
        }
    }
    let sfls_gap = sfls
        .final_entry()
        .metrics
        .relative_gap
        .ok_or_else(|| "sfls trace carries no relative gap".to_string())?;
    let dfls_gap = dfls
        .final_entry()
        .metrics
        .relative_gap
        .ok_or_else(|| "dfls trace carries no relative gap".to_string())?;
    ensure!(
        sfls_gap <= dfls_gap,
        "after 50 passes sfls gap {sfls_gap:.5} exceeds dfls gap {dfls_gap:.5}"
    );
    Ok(format!(
        "f* ≈ {f_star:.4}; 50-pass gaps: sfls {sfls_gap:.5} ≤ dfls {dfls_gap:.5}"
    ))
}

// --- criterion 9 ------------------------------------------------------------

/// The all-zero classifier of the fairness instance has objective exactly 1
/// and constraint slack (1 − κ)/(2κ) in both group constraints.
fn fairness_at_init() -> Check {
    let mut details = Vec::new();
    for kappa in [0.5, 0.95, 1.0] {
        let spec = FairnessSpec::synthetic(200, 60, 4, kappa, 5.0, 3);
        let p = build_fairness(&spec).or_fail("build instance")?;
        let x0 = vec![0.0; p.dim()];
        let values = p.values(&x0, EvalMode::Exact).or_fail("exact values")?;
        ensure!(
            (values[0] - 1.0).abs() <= 1e-12,
            "κ = {kappa}: f₀(0) = {:.15} differs from 1",
            values[0]
        );
        let expected = (1.0 - kappa) / (2.0 * kappa);
        for i in 0..p.num_constraints() {
            let slack = p.thresholds()[i] - values[i + 1];
            ensure!(
                (slack - expected).abs() <= 1e-12,
                "κ = {kappa}: constraint {i} slack {slack:.15} differs from {expected:.15}"
            );
        }
        details.push(format!("κ = {kappa}: slack {expected:.4}"));
    }
    Ok(details.join("; "))
}

// --- criterion 10 -----------------------------------------------------------

/// Reduced-scale ALP: across 10 seeds, at least 9 keep every outer iterate
/// SAA-feasible within 1e-3 with a non-decreasing reported objective.
fn alp_reduced_scale() -> Check {
    let mdp = PerishableMdpSpec::benchmark(2.0, 10.0, 10.0);
    let spec = AlpSpec::benchmark(mdp, 50);
    let p = build_alp(&spec, 19).or_fail("build instance")?;
    let x0 = p
        .initial_point()
        .ok_or_else(|| "the instance provides no initial point".to_string())?
        .to_vec();
    let f0_x0 = p.values(&x0, p.metrics_mode(0, u64::MAX)).or_fail("objective at x0")?[0];
    let r0 = f0_x0 + 100.0;

    let oracle = OracleConfig::new(200, 2000.0)
        .or_fail("oracle config")?
        .with_batch(20)
        .or_fail("oracle batch")?;
    let config = SflsConfig::new(r0, 2.0, 20, oracle).or_fail("sfls config")?;
    let traces: Vec<_> = (0..10u64)
        .into_par_iter()
        .map(|seed| sfls_solve(&p, &config, seed, None))
        .collect::<Result<_>>()
        .or_fail("seed sweep")?;

    let mut good = 0usize;
    let mut worst_violation = f64::NEG_INFINITY;
    for trace in &traces {
        let feasible = trace.entries.iter().all(|e| e.metrics.max_violation <= 1e-3);
        let monotone = trace
            .entries
            .windows(2)
            .all(|w| w[1].metrics.objective >= w[0].metrics.objective - 1e-3);
        if feasible && monotone {
            good += 1;
        }
        for e in &trace.entries {
            worst_violation = worst_violation.max(e.metrics.max_violation);
        }
    }
    ensure!(
        good >= 9,
        "only {good}/10 seeds kept a feasible, monotone path (worst violation {worst_violation:.2e})"
    );
    let improvement = traces
        .iter()
        .map(|t| t.final_entry().metrics.objective - t.entries[0].metrics.objective)
        .fold(f64::INFINITY, f64::min);
    Ok(format!(
        "{good}/10 seeds feasible and monotone; worst violation {worst_violation:.2e}, min objective gain {improvement:.2}"
    ))
}

// --- criterion 11 -----------------------------------------------------------

fn rel_close(actual: f64, expected: f64) -> bool {
    (actual - expected).abs() <= 1e-9 * expected.abs()
}

/// The deviation factor, both iteration budgets, and the tolerance splitter
/// reproduce their worked example values to 1e-9 relative.
fn worked_constants() -> Check {
    let omega = omega_factor(0.05).or_fail("omega(0.05)")?;
    ensure!(
        rel_close(omega, 8.607289541244866),
        "Ω(0.05) = {omega:.15} differs from 8.607289541244866"
    );
    let delta_linear = 24.0 * (-12.0f64).exp();
    let omega_linear = omega_factor(delta_linear).or_fail("omega on the linear branch")?;
    ensure!(
        rel_close(omega_linear, 16.0),
        "Ω(24e⁻¹²) = {omega_linear:.15} differs from 16"
    );

    // Constants rigged so the joint gradient scale is exactly M = 1.
    let geometry = Geometry {
        dx: std::f64::consts::FRAC_1_SQRT_2,
        dy: std::f64::consts::FRAC_1_SQRT_2,
    };
    let constants = TheoryConstants::new(0.6, 0.8, 1.0).or_fail("constants")?;
    let joint_m = constants.joint_m(&geometry);
    ensure!(rel_close(joint_m, 1.0), "rigged joint M = {joint_m:.15} is not 1");
    let t_budget =
        iteration_bound_t_with_omega(&constants, &geometry, 2.0, 100.0).or_fail("T budget")?;
    ensure!(t_budget == 9, "T budget {t_budget} differs from the worked value 9");
    let w_budget =
        iteration_bound_w_with_omega(&constants, &geometry, 2.0, 100.0).or_fail("W budget")?;
    ensure!(w_budget == 6, "W budget {w_budget} differs from the worked value 6");

    let (eps_opt, eps_a) = derive_tolerances(-0.5, 1.1, 0.01).or_fail("tolerances")?;
    ensure!(
        rel_close(eps_opt, 0.004545454545454545),
        "ε_opt = {eps_opt:.18} differs from 1/220"
    );
    ensure!(
        rel_close(eps_a, 9.838646202282574e-5),
        "ε_A = {eps_a:.18e} differs from the worked value"
    );
    Ok(format!(
        "Ω = {omega:.9}/{omega_linear:.1}, budgets T = {t_budget}, W = {w_budget}, ε = ({eps_opt:.9}, {eps_a:.9e})"
    ))
}

// --- criterion 12 -----------------------------------------------------------

/// Parser round-trip identity on random sparse rows, and line-numbered errors
/// on malformed input.
fn libsvm_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x11b);
    let labels = [-1i64, 1, 3];
    let mut text = String::new();
    for _ in 0..100 {
        let label = labels[rng.random_range(0..labels.len())];
        write!(text, "{label}").expect("writing to a string cannot fail");
        let features = rng.random_range(0..8usize);
        let mut index = 0u32;
        for _ in 0..features {
            index += rng.random_range(1..40u32);
            let value: f64 = rng.random_range(-5.0..5.0);
            write!(text, " {index}:{value}").expect("writing to a string cannot fail");
        }
        text.push('\n');
    }
    let first = parse_libsvm(&text, None).or_fail("parse generated rows")?;
    let second = parse_libsvm(&first.to_libsvm(), None).or_fail("re-parse serialized rows")?;
    ensure!(first == second, "round trip changed the dataset");
    ensure!(first.rows() == 100, "expected 100 rows, parsed {}", first.rows());

    let malformed: [(&str, usize); 4] = [
        ("1 1:0.5\n2 0:1\n", 2),
        ("1 1:0.5\n1 2:0.3\n-1 4:x\n", 3),
        ("1 5:2 3:4\n", 1),
        ("1 1:1\n1 qid:3\n", 2),
    ];
    for (bad, line) in malformed {
        match parse_libsvm(bad, None) {
            Err(SlevelError::Parse { line: got, .. }) if got == line => {}
            Err(SlevelError::Parse { line: got, message }) => {
                return Err(format!(
                    "malformed input reported line {got} instead of {line} ({message})"
                ));
            }
            other => return Err(format!("expected a line-{line} parse error, got {other:?}")),
        }
    }
    Ok(format!(
        "100 rows ({} nonzeros) round-tripped; 4 malformed cases carried line numbers",
        first.nonzeros()
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels_select_the_documented_criteria() {
        assert_eq!(VerifyLevel::Quick.criteria(), &[1, 2, 3, 5, 7, 9, 11, 12]);
        assert_eq!(VerifyLevel::Full.criteria().len(), 12);
        // Every advertised id resolves to a registered criterion.
        for &id in VerifyLevel::Full.criteria() {
            assert!(CRITERIA.iter().any(|(cid, _, _)| *cid == id));
        }
    }

    #[test]
    fn fitted_slope_recovers_a_hand_line() {
        // y = 3 − 0.5x sampled at four points.
        let points: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&x| (x, 3.0 - 0.5 * x))
            .collect();
        assert!((fitted_slope(&points) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn fast_criteria_pass_and_report() {
        // The sub-second criteria double as a smoke test of the runner.
        for id in [9, 11, 12] {
            let outcome = run_criterion(id);
            assert!(outcome.passed, "criterion {id} failed: {}", outcome.detail);
            let line = outcome.to_string();
            assert!(line.contains("pass"), "report line: {line}");
        }
    }

    #[test]
    fn failures_render_with_the_fail_marker() {
        let outcome = CheckOutcome {
            id: 3,
            name: "oracle-bound-sandwich",
            passed: false,
            detail: "step 7: l̂ = 0.1 exceeds H(2)".into(),
            wall_ms: 12.0,
        };
        let line = outcome.to_string();
        assert!(line.contains("FAIL") && line.contains("step 7"));
    }
}

//! Prox-mapping geometry for the primal-dual saddle iterates.
//!
//! The primal block carries the Euclidean distance-generating function
//! ω_x(x) = ½‖x‖₂² (1-strongly convex in ‖·‖₂); the dual block — a
//! probability simplex over the objective and the m constraints — carries
//! negative entropy ω_y(y) = Σ yᵢ ln yᵢ (1-strongly convex in ‖·‖₁). The
//! joint function is the diameter-normalized sum
//!
//! ```text
//! ω_z(z) = ω_x(x) / (2 D_x²) + ω_y(y) / (2 D_y²),
//! ```
//!
//! whose prox mapping splits into a Euclidean projection with step 2·D_x²·ζ_x
//! and an entropy (multiplicative-weights) step with 2·D_y²·ζ_y. D_x is the
//! square root of the ω_x-range over the domain and D_y = √ln(m+1).

use crate::domain::DomainSpec;
use crate::error::{Result, SlevelError};
use crate::linalg;
use crate::problem::SoecProblem;
use crate::rng::{self, ScenarioStream};

/// Lower bound applied to dual coordinates after each entropy step. Keeps
/// logarithms finite; the mass it injects (≤ (m+1)·floor) is re-normalized
/// away and is far below solver tolerances.
pub const ENTROPY_FLOOR: f64 = 1e-12;

/// Prox diameters of the two blocks.
#[derive(Debug, Clone, Copy)]
pub struct Geometry {
    /// √(max ω_x − min ω_x) over the primal domain.
    pub dx: f64,
    /// √ln(m+1), the entropy range over the (m+1)-simplex.
    pub dy: f64,
}

impl Geometry {
    /// Compute both diameters for a domain with `num_constraints` expectation
    /// constraints. A centered ball of radius λ gives `dx = λ/√2`.
    pub fn for_domain(domain: &DomainSpec, num_constraints: usize) -> Geometry {
        let (lo, hi) = domain.omega_bounds();
        Geometry {
            dx: (hi - lo).max(0.0).sqrt(),
            dy: ((num_constraints + 1) as f64).ln().sqrt(),
        }
    }
}

/// In-place Euclidean projection onto the primal domain.
pub fn project_primal(domain: &DomainSpec, x: &mut [f64]) {
    domain.project(x);
}

/// In-place entropy prox step on the simplex:
/// `y ← argmin_u ζᵀ(u − y) + KL(u ‖ y)`, i.e. yᵢ ∝ yᵢ·exp(−ζᵢ) re-normalized.
/// Computed in log space to survive extreme ζ, then floored and re-normalized.
pub fn prox_entropy_simplex(y: &mut [f64], zeta: &[f64]) {
    debug_assert_eq!(y.len(), zeta.len());
    let mut max_logit = f64::NEG_INFINITY;
    for (yi, zi) in y.iter_mut().zip(zeta) {
        *yi = yi.max(ENTROPY_FLOOR).ln() - zi;
        max_logit = max_logit.max(*yi);
    }
    let mut sum = 0.0;
    for yi in y.iter_mut() {
        *yi = (*yi - max_logit).exp();
        sum += *yi;
    }
    for yi in y.iter_mut() {
        *yi /= sum;
    }
    // Floor pass: keep every coordinate strictly positive for the next step.
    let mut floored_sum = 0.0;
    for yi in y.iter_mut() {
        *yi = yi.max(ENTROPY_FLOOR);
        floored_sum += *yi;
    }
    if floored_sum != 1.0 {
        for yi in y.iter_mut() {
            *yi /= floored_sum;
        }
    }
}

/// Joint prox step on the product space: the scaled-sum distance-generating
/// function decomposes, so the primal block takes a projected gradient step
/// with 2·D_x²·ζ_x and the dual block an entropy step with 2·D_y²·ζ_y.
pub fn prox_product(
    geometry: &Geometry,
    domain: &DomainSpec,
    x: &mut [f64],
    y: &mut [f64],
    zeta_x: &[f64],
    zeta_y: &[f64],
    zeta_y_scaled: &mut [f64],
) {
    let step_x = 2.0 * geometry.dx * geometry.dx;
    for (xi, zi) in x.iter_mut().zip(zeta_x) {
        *xi -= step_x * zi;
    }
    domain.project(x);
    let step_y = 2.0 * geometry.dy * geometry.dy;
    for (out, zi) in zeta_y_scaled.iter_mut().zip(zeta_y) {
        *out = step_y * zi;
    }
    prox_entropy_simplex(y, zeta_y_scaled);
}

/// Euclidean Bregman divergence V(a, b) = ½‖b − a‖₂².
pub fn bregman_euclidean(from: &[f64], to: &[f64]) -> f64 {
    0.5 * linalg::dist2_sq(from, to)
}

/// Entropy Bregman divergence on the simplex:
/// V(a, b) = Σ bᵢ ln(bᵢ/aᵢ), the KL divergence of `b` from `a`.
pub fn bregman_entropy(from: &[f64], to: &[f64]) -> f64 {
    debug_assert_eq!(from.len(), to.len());
    to.iter()
        .zip(from)
        .map(|(b, a)| {
            if *b <= 0.0 {
                0.0
            } else {
                b * (b / a.max(ENTROPY_FLOOR)).ln()
            }
        })
        .sum()
}

/// Bregman divergence of the joint, diameter-normalized function ω_z.
pub fn bregman_joint(
    geometry: &Geometry,
    x_from: &[f64],
    y_from: &[f64],
    x_to: &[f64],
    y_to: &[f64],
) -> f64 {
    bregman_euclidean(x_from, x_to) / (2.0 * geometry.dx * geometry.dx)
        + bregman_entropy(y_from, y_to) / (2.0 * geometry.dy * geometry.dy)
}

/// Light-tail scale constants of the stochastic saddle subgradients:
/// `m_x` bounds the primal block in ‖·‖₂, `m_y` the dual block in ‖·‖∞,
/// and `q` the deviation of the sampled saddle value from its mean.
#[derive(Debug, Clone, Copy)]
pub struct TheoryConstants {
    pub m_x: f64,
    pub m_y: f64,
    pub q: f64,
}

impl TheoryConstants {
    pub fn new(m_x: f64, m_y: f64, q: f64) -> Result<Self> {
        if !(m_x >= 0.0 && m_y >= 0.0 && q >= 0.0)
            || !(m_x.is_finite() && m_y.is_finite() && q.is_finite())
        {
            return Err(SlevelError::InvalidArgument(
                "theory constants must be finite and non-negative".into(),
            ));
        }
        Ok(Self { m_x, m_y, q })
    }

    /// Joint subgradient scale M = √(2D_x²·m_x² + 2D_y²·m_y²)
    /// (strong-convexity moduli are 1 for both blocks).
    pub fn joint_m(&self, geometry: &Geometry) -> f64 {
        (2.0 * geometry.dx * geometry.dx * self.m_x * self.m_x
            + 2.0 * geometry.dy * geometry.dy * self.m_y * self.m_y)
            .sqrt()
    }

    /// Estimate the constants empirically: draw `draws` scenarios per
    /// component at the canonical starting point (primal ω-argmin, uniform
    /// dual) and take 1.2× the largest sampled norm. A crude but honest
    /// stand-in for sup-norm bounds that are rarely available in closed form.
    pub fn estimate(problem: &SoecProblem, level: f64, draws: usize, seed: u64) -> Result<Self> {
        let d = problem.dim();
        let m = problem.num_constraints();
        let x0 = problem.domain().omega_argmin();
        let y_uniform = 1.0 / (m + 1) as f64;
        let probe_seed = rng::mix(seed, rng::salt::PROBE);

        let mut streams: Vec<ScenarioStream> =
            (0..=m).map(|i| ScenarioStream::new(probe_seed, i)).collect();
        let mut max_gx: f64 = 0.0;
        let mut max_gy: f64 = 0.0;
        let mut grad = vec![0.0; d];
        let mut values = Vec::with_capacity(draws);
        let mut phi_sum = 0.0;
        for k in 0..draws {
            grad.fill(0.0);
            let mut gy_norm: f64 = 0.0;
            let mut phi = 0.0;
            for (i, stream) in streams.iter_mut().enumerate() {
                let v =
                    problem.component_sample(i, &x0, stream.scenario(k as u64), 1.0, &mut grad)?;
                let shifted = v - problem.shifted_threshold(i, level);
                gy_norm = gy_norm.max(shifted.abs());
                phi += y_uniform * shifted;
            }
            // grad accumulated every component with weight 1; the probe wants
            // the uniform-dual mix, so scale once.
            max_gx = max_gx.max(linalg::norm2(&grad) * y_uniform);
            max_gy = max_gy.max(gy_norm);
            phi_sum += phi;
            values.push(phi);
        }
        let phi_mean = phi_sum / draws as f64;
        let max_dev = values
            .iter()
            .fold(0.0f64, |acc, v| acc.max((v - phi_mean).abs()));
        TheoryConstants::new(1.2 * max_gx, 1.2 * max_gy, 1.2 * max_dev)
    }
}

/// Deviation factor Ω(δ) = max{√(12·ln(24/δ)), (4/3)·ln(24/δ)}.
pub fn omega_factor(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(SlevelError::InvalidArgument(format!(
            "confidence parameter must lie in (0,1), got {delta}"
        )));
    }
    let l = (24.0 / delta).ln();
    Ok((12.0 * l).sqrt().max(l * 4.0 / 3.0))
}

fn ceil_to_u64(v: f64) -> u64 {
    if v <= 0.0 {
        0
    } else if v >= u64::MAX as f64 {
        u64::MAX
    } else {
        v.ceil() as u64
    }
}

/// Budget formula for the online-validation oracle given the precomputed
/// scale A = QΩ + 10MΩ + 4.5M: `max{6, (16A/ε · ln(8A/ε))² − 2}`, ceiled.
fn budget_t(a: f64, eps: f64) -> u64 {
    let inner = (16.0 * a / eps) * (8.0 * a / eps).ln();
    ceil_to_u64((inner * inner - 2.0).max(6.0))
}

/// Budget formula for the plain mirror-descent oracle given A' = 10MΩ + 4.5M:
/// `max{6, (8A'/ε · ln(4A'/ε))² − 2}`, ceiled.
fn budget_w(a: f64, eps: f64) -> u64 {
    let inner = (8.0 * a / eps) * (4.0 * a / eps).ln();
    ceil_to_u64((inner * inner - 2.0).max(6.0))
}

/// Iteration budget sufficient for the online-validation oracle to certify an
/// ε_A-accurate level-set value with confidence 1 − δ:
/// `max{6, (16A/ε · ln(8A/ε))² − 2}` with A = QΩ + 10MΩ + 4.5M, ceiled.
/// Can be astronomically large for small ε_A; it is a certificate budget, not
/// the operating default.
pub fn iteration_bound_t(
    constants: &TheoryConstants,
    geometry: &Geometry,
    delta: f64,
    eps_a: f64,
) -> Result<u64> {
    iteration_bound_t_with_omega(constants, geometry, omega_factor(delta)?, eps_a)
}

/// The T budget with the deviation factor Ω supplied directly instead of
/// derived from a confidence level.
pub fn iteration_bound_t_with_omega(
    constants: &TheoryConstants,
    geometry: &Geometry,
    omega: f64,
    eps_a: f64,
) -> Result<u64> {
    validate_budget_inputs(omega, eps_a)?;
    let m = constants.joint_m(geometry);
    let a = constants.q * omega + 10.0 * m * omega + 4.5 * m;
    Ok(budget_t(a, eps_a))
}

/// Iteration budget for the plain mirror-descent oracle (no value
/// estimation): `max{6, (8A'/ε · ln(4A'/ε))² − 2}` with A' = 10MΩ + 4.5M.
pub fn iteration_bound_w(
    constants: &TheoryConstants,
    geometry: &Geometry,
    delta: f64,
    eps: f64,
) -> Result<u64> {
    iteration_bound_w_with_omega(constants, geometry, omega_factor(delta)?, eps)
}

/// The W budget with the deviation factor Ω supplied directly.
pub fn iteration_bound_w_with_omega(
    constants: &TheoryConstants,
    geometry: &Geometry,
    omega: f64,
    eps: f64,
) -> Result<u64> {
    validate_budget_inputs(omega, eps)?;
    let m = constants.joint_m(geometry);
    let a = 10.0 * m * omega + 4.5 * m;
    Ok(budget_w(a, eps))
}

fn validate_budget_inputs(omega: f64, eps: f64) -> Result<()> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(SlevelError::InvalidArgument(format!(
            "deviation factor must be positive and finite, got {omega}"
        )));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(SlevelError::InvalidArgument(format!(
            "accuracy must be positive and finite, got {eps}"
        )));
    }
    Ok(())
}

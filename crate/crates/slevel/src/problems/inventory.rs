//! Perishable inventory control MDP and its approximate linear program.
//!
//! The MDP tracks on-hand inventory by remaining lifetime (z₀ oldest, with
//! z₀ < 0 meaning backlogged demand down to a floor l_s) plus orders in
//! transit. The approximate linear program (ALP) maximizes a lower bound
//! τ + Σ_b θ_b·φ_b(s⁰) on the optimal discounted cost subject to one sampled
//! Bellman-style constraint per state-action pair:
//!
//! (1 − γ)τ + Σ_b θ_b·(φ_b(sᵢ) − γ·E[φ_b(f(sᵢ, aᵢ, G))]) − c(sᵢ, aᵢ) ≤ 0.
//!
//! Each constraint is affine in (τ, θ), so a single demand draw gives an
//! unbiased affine scenario. The problem is posed as a maximization and
//! solved as the minimization of its negation.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::domain::DomainSpec;
use crate::error::{Result, SlevelError};
use crate::problem::{
    ClosedForm, Component, FiniteSum, MeanSum, SoecProblem, KAHAN_THRESHOLD,
};
use crate::rng;

/// Normal distribution restricted to [lo, hi], sampled by inverse CDF.
#[derive(Debug, Clone)]
pub struct TruncatedNormal {
    base: Normal,
    mean: f64,
    sd: f64,
    lo: f64,
    hi: f64,
    cdf_lo: f64,
    cdf_hi: f64,
}

impl TruncatedNormal {
    pub fn new(mean: f64, sd: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
            return Err(SlevelError::InvalidArgument(format!(
                "truncated normal needs finite mean and sd > 0, got ({mean}, {sd})"
            )));
        }
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(SlevelError::InvalidArgument(format!(
                "truncation interval must satisfy lo < hi, got [{lo}, {hi}]"
            )));
        }
        let base = Normal::new(mean, sd).expect("validated parameters");
        let cdf_lo = base.cdf(lo);
        let cdf_hi = base.cdf(hi);
        if !(cdf_hi > cdf_lo) {
            return Err(SlevelError::InvalidArgument(format!(
                "truncation interval [{lo}, {hi}] carries no probability mass"
            )));
        }
        Ok(Self { base, mean, sd, lo, hi, cdf_lo, cdf_hi })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Quantile of the truncated distribution at u ∈ [0, 1].
    pub fn quantile(&self, u: f64) -> f64 {
        let p = self.cdf_lo + u.clamp(0.0, 1.0) * (self.cdf_hi - self.cdf_lo);
        self.base.inverse_cdf(p).clamp(self.lo, self.hi)
    }

    /// One inverse-CDF draw (consumes exactly one 64-bit word).
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.quantile(rng::unit(rng))
    }

    /// `count` draws from a fresh generator keyed by `seed`.
    pub fn sample_many(&self, seed: u64, count: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.sample(&mut rng)).collect()
    }

    /// Exact mean μ + σ·(φ(α) − φ(β))/Z of the truncated distribution.
    pub fn mean(&self) -> f64 {
        let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let alpha = (self.lo - self.mean) / self.sd;
        let beta = (self.hi - self.mean) / self.sd;
        self.mean + self.sd * (pdf(alpha) - pdf(beta)) / (self.cdf_hi - self.cdf_lo)
    }
}

/// Perishable inventory MDP with partial backlogging and order lead time.
#[derive(Debug, Clone)]
pub struct PerishableMdpSpec {
    /// Product lifetime I ≥ 2: on-hand levels z₀ … z_{I−1}.
    pub lifetime: usize,
    /// Order lead time J ≥ 2: in-transit quantities q₁ … q_{J−1}.
    pub lead_time: usize,
    /// Per-period order cap ā.
    pub max_order: f64,
    /// Backlog floor l_s < 0; demand beyond it is lost.
    pub backlog_floor: f64,
    /// Discount factor γ ∈ (0, 1).
    pub discount: f64,
    pub cost_purchase: f64,
    pub cost_lost: f64,
    pub cost_disposal: f64,
    pub cost_holding: f64,
    pub cost_backlog: f64,
    pub demand: TruncatedNormal,
    /// Initial state s⁰ = (z₀ … z_{I−1}, q₁ … q_{J−1}).
    pub initial_state: Vec<f64>,
}

impl PerishableMdpSpec {
    /// The benchmark family: I = J = 2, demand truncated normal on [0, 10]
    /// with mean 5 and sd 2, c_p = 20, c_l = 100, ā = 10, l_s = −10,
    /// γ = 0.95, s⁰ = (5, 0, 0). The remaining costs are the instance triple
    /// (c_h, c_d, c_b).
    pub fn benchmark(cost_holding: f64, cost_disposal: f64, cost_backlog: f64) -> Self {
        Self {
            lifetime: 2,
            lead_time: 2,
            max_order: 10.0,
            backlog_floor: -10.0,
            discount: 0.95,
            cost_purchase: 20.0,
            cost_lost: 100.0,
            cost_disposal,
            cost_holding,
            cost_backlog,
            demand: TruncatedNormal::new(5.0, 2.0, 0.0, 10.0).expect("valid benchmark demand"),
            initial_state: vec![5.0, 0.0, 0.0],
        }
    }

    pub fn state_dim(&self) -> usize {
        self.lifetime + self.lead_time - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.lifetime < 2 || self.lead_time < 2 {
            return Err(SlevelError::InvalidArgument(
                "lifetime and lead time must both be ≥ 2".into(),
            ));
        }
        if !(self.max_order > 0.0 && self.max_order.is_finite()) {
            return Err(SlevelError::InvalidArgument("order cap must be positive".into()));
        }
        if !(self.backlog_floor < 0.0 && self.backlog_floor.is_finite()) {
            return Err(SlevelError::InvalidArgument("backlog floor must be negative".into()));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(SlevelError::InvalidArgument(format!(
                "discount must lie in (0, 1), got {}",
                self.discount
            )));
        }
        let costs = [
            self.cost_purchase,
            self.cost_lost,
            self.cost_disposal,
            self.cost_holding,
            self.cost_backlog,
        ];
        if costs.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(SlevelError::InvalidArgument("costs must be finite and ≥ 0".into()));
        }
        if self.initial_state.len() != self.state_dim() || !self.state_valid(&self.initial_state) {
            return Err(SlevelError::InvalidArgument(format!(
                "initial state must be a valid state of length {}",
                self.state_dim()
            )));
        }
        Ok(())
    }

    /// State invariants: z₀ ∈ [l_s − Σ_{i≥2} zᵢ, ā], every other component in
    /// [0, ā]. (For I = 2 the z₀ floor is exactly l_s.)
    pub fn state_valid(&self, s: &[f64]) -> bool {
        if s.len() != self.state_dim() {
            return false;
        }
        let tol = 1e-9;
        let tail: f64 = s[2..self.lifetime].iter().sum();
        s[0] >= self.backlog_floor - tail - tol
            && s[0] <= self.max_order + tol
            && s[1..].iter().all(|v| (-tol..=self.max_order + tol).contains(v))
    }
}

/// One-step dynamics: serve demand first-come-first-serve from the oldest
/// stock, age the survivors, advance the order pipeline, append the new
/// order.
pub fn mdp_transition(spec: &PerishableMdpSpec, s: &[f64], a: f64, demand: f64) -> Vec<f64> {
    debug_assert_eq!(s.len(), spec.state_dim());
    let z = &s[..spec.lifetime];
    let pipeline = &s[spec.lifetime..];
    let unmet = (demand - z[0]).max(0.0);
    let tail: f64 = z[2..].iter().sum();
    let mut next = Vec::with_capacity(s.len());
    next.push((z[1] - unmet).max(spec.backlog_floor - tail));
    next.extend_from_slice(&z[2..]);
    next.extend_from_slice(pipeline);
    next.push(a);
    next
}

/// Realized one-period cost at demand `demand`: discounted purchase plus the
/// holding, backlog, disposal, and lost-sale hinges.
pub fn stage_cost_realized(spec: &PerishableMdpSpec, s: &[f64], a: f64, demand: f64) -> f64 {
    debug_assert_eq!(s.len(), spec.state_dim());
    let z = &s[..spec.lifetime];
    let fresh: f64 = z[1..].iter().sum();
    let total = fresh + z[0];
    let unmet = (demand - z[0]).max(0.0);
    spec.discount.powi(spec.lead_time as i32) * spec.cost_purchase * a
        + spec.cost_holding * (fresh - unmet).max(0.0)
        + spec.cost_backlog * (demand - total).max(0.0)
        + spec.cost_disposal * (z[0] - demand).max(0.0)
        + spec.cost_lost * (spec.backlog_floor + demand - total).max(0.0)
}

/// Expected one-period cost approximated over a demand batch: the
/// deterministic purchase term plus the batch mean of the hinge terms.
pub fn mdp_stage_cost(
    spec: &PerishableMdpSpec,
    s: &[f64],
    a: f64,
    demands: &[f64],
) -> Result<f64> {
    if demands.is_empty() {
        return Err(SlevelError::InvalidArgument(
            "stage cost needs at least one demand draw".into(),
        ));
    }
    let mut acc = MeanSum::new(demands.len() > KAHAN_THRESHOLD);
    for &g in demands {
        acc.add(stage_cost_realized(spec, s, 0.0, g));
    }
    Ok(spec.discount.powi(spec.lead_time as i32) * spec.cost_purchase * a
        + acc.value() / demands.len() as f64)
}

/// Knots ν for the hinge features: demand mean, 25% quantile, 50% quantile.
pub fn basis_knots(spec: &PerishableMdpSpec) -> [f64; 3] {
    [spec.demand.mean(), spec.demand.quantile(0.25), spec.demand.quantile(0.5)]
}

pub const BASIS_LEN: usize = 18;

fn basis_into(knots: &[f64; 3], s: &[f64], out: &mut [f64; BASIS_LEN]) {
    let (z0, z1, q1) = (s[0], s[1], s[2]);
    out[0] = z0;
    out[1] = z1;
    out[2] = q1;
    for (j, &nu) in knots.iter().enumerate() {
        let block = &mut out[3 + 5 * j..8 + 5 * j];
        block[0] = (z0 - nu).max(0.0);
        block[1] = (z0 + z1 - 2.0 * nu).max(0.0);
        block[2] = (z0 + z1 + q1 - 3.0 * nu).max(0.0);
        block[3] = (2.0 * nu - z0 - z1 - q1).max(0.0);
        block[4] = (nu - z1 - q1).max(0.0);
    }
}

/// The 18 value-function features for the I = J = 2 state (z₀, z₁, q₁):
/// the three linear coordinates, then five hinges per knot.
pub fn basis_features(spec: &PerishableMdpSpec, s: &[f64]) -> Result<Vec<f64>> {
    if spec.lifetime != 2 || spec.lead_time != 2 {
        return Err(SlevelError::Unsupported(
            "the basis set is defined for lifetime = lead time = 2".into(),
        ));
    }
    if s.len() != 3 {
        return Err(SlevelError::InvalidArgument(format!(
            "state must have length 3, got {}",
            s.len()
        )));
    }
    let mut out = [0.0; BASIS_LEN];
    basis_into(&basis_knots(spec), s, &mut out);
    Ok(out.to_vec())
}

/// Approximate-linear-program instance over a perishable inventory MDP.
#[derive(Debug, Clone)]
pub struct AlpSpec {
    pub mdp: PerishableMdpSpec,
    /// Number m of sampled state-action constraints.
    pub num_constraints: usize,
    /// Intercept range: τ ∈ [0, tau_bound].
    pub tau_bound: f64,
    /// Weight box: θ_b ∈ [−weight_bound, weight_bound].
    pub weight_bound: f64,
    /// Demand draws behind each c(sᵢ, aᵢ) estimate when demands are fresh.
    pub cost_estimate_samples: usize,
    /// `Some(n)`: replace the demand distribution by n frozen draws shared by
    /// all constraints. The constraints become finite sums with exact
    /// evaluators (usable by the deterministic baseline), and the initial
    /// point is feasible for the frozen problem exactly.
    pub frozen_demand_samples: Option<usize>,
}

impl AlpSpec {
    /// Benchmark geometry: box [0, 3000] × [−5, 5]¹⁸, 20,000-draw cost
    /// estimates, fresh demand draws.
    pub fn benchmark(mdp: PerishableMdpSpec, num_constraints: usize) -> Self {
        Self {
            mdp,
            num_constraints,
            tau_bound: 3000.0,
            weight_bound: 5.0,
            cost_estimate_samples: 20_000,
            frozen_demand_samples: None,
        }
    }

    fn validate(&self) -> Result<()> {
        self.mdp.validate()?;
        if self.num_constraints == 0 {
            return Err(SlevelError::InvalidArgument(
                "the sampled constraint set is empty".into(),
            ));
        }
        if !(self.tau_bound > 0.0) || !(self.weight_bound > 0.0) {
            return Err(SlevelError::InvalidArgument(
                "tau and weight bounds must be positive".into(),
            ));
        }
        if self.cost_estimate_samples == 0 || self.frozen_demand_samples == Some(0) {
            return Err(SlevelError::InvalidArgument(
                "demand sample counts must be ≥ 1".into(),
            ));
        }
        Ok(())
    }
}

/// Data shared by all sampled constraints.
struct AlpShared {
    mdp: PerishableMdpSpec,
    knots: [f64; 3],
    /// Sampled pairs (sᵢ, aᵢ) with φ(sᵢ) cached.
    pairs: Vec<(Vec<f64>, f64)>,
    phi_s: Vec<[f64; BASIS_LEN]>,
}

impl AlpShared {
    /// Affine scenario of constraint `i` at demand `g`:
    /// (1−γ)τ + Σ_b θ_b·(φ_b(sᵢ) − γ·φ_b(f(sᵢ, aᵢ, g))) − ĉ(sᵢ, aᵢ, g).
    fn scenario(&self, i: usize, x: &[f64], g: f64, weight: f64, grad: &mut [f64]) -> f64 {
        let (s, a) = &self.pairs[i];
        let next = mdp_transition(&self.mdp, s, *a, g);
        let mut phi_next = [0.0; BASIS_LEN];
        basis_into(&self.knots, &next, &mut phi_next);
        let slope = 1.0 - self.mdp.discount;
        let mut v = slope * x[0] - stage_cost_realized(&self.mdp, s, *a, g);
        grad[0] += weight * slope;
        for b in 0..BASIS_LEN {
            let coeff = self.phi_s[i][b] - self.mdp.discount * phi_next[b];
            v += x[1 + b] * coeff;
            grad[1 + b] += weight * coeff;
        }
        v
    }
}

/// Constraint with fresh inverse-CDF demand draws (no exact evaluator).
struct FreshDemandConstraint {
    shared: Arc<AlpShared>,
    index: usize,
}

impl Component for FreshDemandConstraint {
    fn sample(&self, x: &[f64], rng: &mut ChaCha8Rng, weight: f64, grad: &mut [f64]) -> f64 {
        let g = self.shared.mdp.demand.sample(rng);
        self.shared.scenario(self.index, x, g, weight, grad)
    }

    fn exact(&self, _x: &[f64], _weight: f64, _grad: &mut [f64]) -> Option<f64> {
        None
    }

    fn has_exact(&self) -> bool {
        false
    }
}

/// Build the ALP as a SOEC: decision vector x = (τ, θ₁ … θ_B), objective
/// maximize τ + Σ_b θ_b·φ_b(s⁰) (solved as its negation), one affine
/// expectation constraint per sampled pair with threshold 0. The initial
/// point is (τ̃, 0) with τ̃ = min_i c(sᵢ, aᵢ)/(1−γ), which keeps every
/// constraint nonpositive.
pub fn build_alp(spec: &AlpSpec, seed: u64) -> Result<SoecProblem> {
    spec.validate()?;
    let mdp = &spec.mdp;
    if mdp.lifetime != 2 || mdp.lead_time != 2 {
        return Err(SlevelError::Unsupported(
            "the ALP basis set is defined for lifetime = lead time = 2".into(),
        ));
    }
    let m = spec.num_constraints;
    let dim = 1 + BASIS_LEN;
    let knots = basis_knots(mdp);

    // Sampled pairs: uniform over [l_s, ā] × [0, ā]^{I+J−2} × [0, ā].
    let mut build_rng = ChaCha8Rng::seed_from_u64(rng::mix3(seed, rng::salt::BUILD, 0));
    let mut pairs = Vec::with_capacity(m);
    let mut phi_s = Vec::with_capacity(m);
    for _ in 0..m {
        let mut s = Vec::with_capacity(mdp.state_dim());
        s.push(rng::uniform(&mut build_rng, mdp.backlog_floor, mdp.max_order));
        for _ in 1..mdp.state_dim() {
            s.push(rng::uniform(&mut build_rng, 0.0, mdp.max_order));
        }
        let a = rng::uniform(&mut build_rng, 0.0, mdp.max_order);
        let mut phi = [0.0; BASIS_LEN];
        basis_into(&knots, &s, &mut phi);
        pairs.push((s, a));
        phi_s.push(phi);
    }

    // Mean stage costs drive the feasible intercept τ̃. In frozen mode they
    // use the same draws as the constraints themselves.
    let frozen: Option<Arc<Vec<f64>>> = spec.frozen_demand_samples.map(|n| {
        Arc::new(mdp.demand.sample_many(rng::mix3(seed, rng::salt::BUILD, 1), n))
    });
    let cost_demands = match &frozen {
        Some(d) => Arc::clone(d),
        None => Arc::new(
            mdp.demand
                .sample_many(rng::mix3(seed, rng::salt::BUILD, 2), spec.cost_estimate_samples),
        ),
    };
    let mut tau_tilde = f64::INFINITY;
    for (s, a) in &pairs {
        let c = mdp_stage_cost(mdp, s, *a, &cost_demands)?;
        tau_tilde = tau_tilde.min(c / (1.0 - mdp.discount));
    }
    tau_tilde = tau_tilde.clamp(0.0, spec.tau_bound);

    let shared = Arc::new(AlpShared { mdp: mdp.clone(), knots, pairs, phi_s });

    let mut phi_s0 = [0.0; BASIS_LEN];
    basis_into(&knots, &mdp.initial_state, &mut phi_s0);
    let objective = ClosedForm::new(
        move |x: &[f64], w: f64, g: &mut [f64]| {
            let mut v = x[0];
            g[0] -= w;
            for b in 0..BASIS_LEN {
                v += x[1 + b] * phi_s0[b];
                g[1 + b] -= w * phi_s0[b];
            }
            -v
        },
        0.0,
    )?;

    let mut components: Vec<Box<dyn Component>> = Vec::with_capacity(m + 1);
    components.push(Box::new(objective));
    for i in 0..m {
        match &frozen {
            Some(demands) => {
                let shared = Arc::clone(&shared);
                let demands = Arc::clone(demands);
                components.push(Box::new(FiniteSum::new(
                    demands.len(),
                    move |x: &[f64], k: usize, w: f64, g: &mut [f64]| {
                        shared.scenario(i, x, demands[k], w, g)
                    },
                )?));
            }
            None => {
                components.push(Box::new(FreshDemandConstraint {
                    shared: Arc::clone(&shared),
                    index: i,
                }));
            }
        }
    }

    let mut lower = vec![-spec.weight_bound; dim];
    let mut upper = vec![spec.weight_bound; dim];
    lower[0] = 0.0;
    upper[0] = spec.tau_bound;
    let domain = DomainSpec::r#box(lower, upper)?;

    let mut x0 = vec![0.0; dim];
    x0[0] = tau_tilde;
    Ok(SoecProblem::new("alp-perishable", domain, components, vec![0.0; m])?
        .with_maximization()
        .with_initial_point(x0)
        .with_dataset_size((m + 1) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::EvalMode;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn benchmark_mdp() -> PerishableMdpSpec {
        PerishableMdpSpec::benchmark(2.0, 10.0, 10.0)
    }

    #[test]
    fn truncated_normal_quantiles_match_reference_values() {
        let d = TruncatedNormal::new(5.0, 2.0, 0.0, 10.0).unwrap();
        assert_relative_eq!(d.quantile(0.25), 3.6704976789830503, max_relative = 1e-10);
        assert_relative_eq!(d.quantile(0.5), 5.0, epsilon = 1e-12);
        assert_relative_eq!(d.quantile(0.1), 2.4925141726596376, max_relative = 1e-10);
        assert_relative_eq!(d.quantile(0.9), 7.507485827340362, max_relative = 1e-10);
        assert_relative_eq!(d.mean(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn truncated_normal_draws_stay_in_support_with_the_right_mean() {
        let d = TruncatedNormal::new(5.0, 2.0, 0.0, 10.0).unwrap();
        let draws = d.sample_many(17, 100_000);
        assert!(draws.iter().all(|g| (0.0..=10.0).contains(g)));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert_relative_eq!(mean, 5.0, epsilon = 0.02);
    }

    #[test]
    fn truncated_normal_analytic_mean_matches_monte_carlo_when_asymmetric() {
        let d = TruncatedNormal::new(1.0, 2.0, 0.0, 10.0).unwrap();
        let draws = d.sample_many(18, 100_000);
        let mc = draws.iter().sum::<f64>() / draws.len() as f64;
        assert_relative_eq!(d.mean(), mc, epsilon = 0.02);
        assert!(d.mean() > 1.0, "truncating mostly from below should raise the mean");
    }

    #[test]
    fn truncated_normal_rejects_degenerate_parameters() {
        assert!(TruncatedNormal::new(5.0, 0.0, 0.0, 10.0).is_err());
        assert!(TruncatedNormal::new(5.0, 2.0, 10.0, 0.0).is_err());
        assert!(TruncatedNormal::new(f64::NAN, 2.0, 0.0, 10.0).is_err());
    }

    #[test]
    fn transition_hand_values() {
        let mdp = benchmark_mdp();
        // Demand 7 eats all 5 old units and 2 more: the single fresh unit
        // pool 0 goes 2 into backlog.
        assert_eq!(mdp_transition(&mdp, &[5.0, 0.0, 0.0], 3.0, 7.0), vec![-2.0, 0.0, 3.0]);
        // No demand: nothing ages into backlog.
        assert_eq!(mdp_transition(&mdp, &[5.0, 0.0, 0.0], 3.0, 0.0), vec![0.0, 0.0, 3.0]);
        // Null dynamics.
        assert_eq!(mdp_transition(&mdp, &[0.0, 0.0, 0.0], 0.0, 0.0), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn transition_preserves_state_invariants() {
        let mdp = benchmark_mdp();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10_000 {
            let s = vec![
                rng.random_range(-10.0..10.0),
                rng.random_range(0.0..10.0),
                rng.random_range(0.0..10.0),
            ];
            let a = rng.random_range(0.0..10.0);
            let g = rng.random_range(0.0..10.0);
            let next = mdp_transition(&mdp, &s, a, g);
            assert!(mdp.state_valid(&next), "invalid next state {next:?} from {s:?}");
        }
    }

    #[test]
    fn stage_cost_hand_values() {
        let mdp = benchmark_mdp();
        // Demand exactly consumes the old stock: all four hinges vanish.
        assert_relative_eq!(
            mdp_stage_cost(&mdp, &[5.0, 0.0, 0.0], 0.0, &[5.0]).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        // Ordering one unit adds the discounted purchase cost γ²·c_p.
        assert_relative_eq!(
            mdp_stage_cost(&mdp, &[5.0, 0.0, 0.0], 1.0, &[5.0]).unwrap(),
            18.05,
            max_relative = 1e-15
        );
        // Empty shelf: five units of backlog at c_b = 10, no lost sales yet.
        assert_relative_eq!(
            mdp_stage_cost(&mdp, &[0.0, 0.0, 0.0], 0.0, &[5.0]).unwrap(),
            50.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn stage_cost_is_nonnegative_for_benchmark_triples() {
        for (ch, cd, cb) in [(2.0, 10.0, 10.0), (5.0, 10.0, 8.0), (2.0, 5.0, 10.0)] {
            let mdp = PerishableMdpSpec::benchmark(ch, cd, cb);
            let mut rng = ChaCha8Rng::seed_from_u64(29);
            for _ in 0..10_000 {
                let s = vec![
                    rng.random_range(-10.0..10.0),
                    rng.random_range(0.0..10.0),
                    rng.random_range(0.0..10.0),
                ];
                let a = rng.random_range(0.0..10.0);
                let g = rng.random_range(0.0..10.0);
                assert!(stage_cost_realized(&mdp, &s, a, g) >= 0.0);
            }
        }
    }

    #[test]
    fn basis_features_layout_and_origin_values() {
        let mdp = benchmark_mdp();
        let knots = basis_knots(&mdp);
        assert_relative_eq!(knots[0], 5.0, epsilon = 1e-12);
        assert_relative_eq!(knots[1], 3.6704976789830503, max_relative = 1e-10);
        assert_relative_eq!(knots[2], 5.0, epsilon = 1e-12);

        let phi = basis_features(&mdp, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(phi.len(), BASIS_LEN);
        assert_eq!(&phi[..3], &[0.0, 0.0, 0.0]);
        for (j, &nu) in knots.iter().enumerate() {
            let block = &phi[3 + 5 * j..8 + 5 * j];
            // At the origin only the two downward hinges survive: 2ν and ν.
            assert_eq!(&block[..3], &[0.0, 0.0, 0.0]);
            assert_relative_eq!(block[3], 2.0 * nu, max_relative = 1e-15);
            assert_relative_eq!(block[4], nu, max_relative = 1e-15);
        }

        let mut bad = benchmark_mdp();
        bad.lifetime = 3;
        bad.initial_state = vec![5.0, 0.0, 0.0, 0.0];
        assert!(matches!(
            basis_features(&bad, &[0.0; 4]),
            Err(SlevelError::Unsupported(_))
        ));
    }

    #[test]
    fn alp_constraints_are_affine_along_random_directions() {
        let mut spec = AlpSpec::benchmark(benchmark_mdp(), 5);
        spec.frozen_demand_samples = Some(40);
        let p = build_alp(&spec, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut scratch = vec![0.0; p.dim()];
        for i in 1..=5 {
            let x: Vec<f64> = (0..p.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let d: Vec<f64> = (0..p.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let at = |t: f64, scratch: &mut Vec<f64>| {
                let xt: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
                p.component_exact(i, &xt, 0.0, scratch).unwrap()
            };
            let (f0, f1, f2) = (at(0.0, &mut scratch), at(1.0, &mut scratch), at(2.0, &mut scratch));
            assert!(
                (f2 - 2.0 * f1 + f0).abs() <= 1e-8 * (1.0 + f0.abs().max(f2.abs())),
                "constraint {i} is not affine: {f0} {f1} {f2}"
            );
        }
    }

    #[test]
    fn frozen_alp_initial_point_is_feasible_with_one_active_constraint() {
        let mut spec = AlpSpec::benchmark(benchmark_mdp(), 12);
        spec.frozen_demand_samples = Some(60);
        let p = build_alp(&spec, 11).unwrap();
        let x0 = p.initial_point().expect("ALP provides a start").to_vec();
        assert!(x0[0] > 0.0 && x0[0] < spec.tau_bound, "intercept clamped: {}", x0[0]);
        let vals = p.values(&x0, EvalMode::Exact).unwrap();
        let worst = vals[1..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // τ̃ makes the cheapest sampled pair active and every other slack.
        assert!(worst <= 1e-9, "initial point violates a constraint by {worst}");
        assert!(worst >= -1e-9, "no constraint is active at the initial point ({worst})");
        // The reported objective is the un-negated maximization value τ̃ + 0.
        assert_relative_eq!(p.objective_sign() * vals[0], x0[0], max_relative = 1e-12);
    }

    #[test]
    fn fresh_alp_samples_have_frozen_counterpart_means() {
        // The stochastic constraint's SAA mean over many draws must approach
        // the frozen-sample finite-sum value built from the same distribution.
        let mdp = benchmark_mdp();
        let fresh = AlpSpec::benchmark(mdp.clone(), 4);
        let mut frozen = AlpSpec::benchmark(mdp, 4);
        frozen.frozen_demand_samples = Some(60_000);
        let pf = build_alp(&fresh, 5).unwrap();
        let pz = build_alp(&frozen, 5).unwrap();
        assert!(!pf.has_exact());
        assert!(pz.has_exact());
        // Distinct per-basis weights so a feature-ordering bug cannot cancel;
        // kept small so the demand-driven cost term dominates the variance.
        let mut x = vec![0.0; pf.dim()];
        x[0] = 100.0;
        for b in 0..BASIS_LEN {
            x[1 + b] = 0.02 * (b + 1) as f64 * if b % 2 == 0 { 1.0 } else { -1.0 };
        }
        let saa = pf.values(&x, EvalMode::Saa { samples: 60_000, seed: 7 }).unwrap();
        let exact = pz.values(&x, EvalMode::Exact).unwrap();
        // Both sides are 60,000-draw means whose standard error is ≲ 1;
        // the tolerance is ~3σ of their difference.
        for (a, b) in saa.iter().zip(&exact).skip(1) {
            assert_relative_eq!(a, b, epsilon = 4.0);
        }
    }

    #[test]
    fn alp_rejects_degenerate_specs() {
        assert!(build_alp(&AlpSpec::benchmark(benchmark_mdp(), 0), 1).is_err());
        let mut tall = benchmark_mdp();
        tall.lifetime = 3;
        tall.initial_state = vec![5.0, 0.0, 0.0, 0.0];
        assert!(matches!(
            build_alp(&AlpSpec::benchmark(tall, 3), 1),
            Err(SlevelError::Unsupported(_))
        ));
        let mut bad = benchmark_mdp();
        bad.discount = 1.0;
        assert!(build_alp(&AlpSpec::benchmark(bad, 3), 1).is_err());
    }
}

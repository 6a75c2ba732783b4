//! Problem descriptions: an expectation objective plus expectation
//! constraints over a closed convex domain, with per-component scenario
//! sampling.
//!
//! A problem with m constraints owns m+1 [`Component`]s (index 0 is the
//! objective). Each component observes single scenarios; batch means are
//! assembled here with a fixed summation policy so identical seeds give
//! bit-identical results. Components that can also evaluate their exact
//! expectation (finite sums, closed forms) unlock exact metrics, the grid
//! evaluator, and the deterministic baseline solver.

use rand_chacha::ChaCha8Rng;

use crate::domain::DomainSpec;
use crate::error::{Result, SlevelError};
use crate::linalg;
use crate::rng::{self, ScenarioStream};

/// Batch sizes above this use Kahan-compensated value sums. Plain sequential
/// summation is exact enough below it and keeps the common path simple;
/// gradient sums always stay plain sequential adds in scenario order.
pub(crate) const KAHAN_THRESHOLD: usize = 10_000;

/// Running sum, optionally Kahan-compensated.
pub(crate) struct MeanSum {
    sum: f64,
    comp: f64,
    kahan: bool,
}

impl MeanSum {
    pub(crate) fn new(kahan: bool) -> Self {
        Self { sum: 0.0, comp: 0.0, kahan }
    }

    #[inline]
    pub(crate) fn add(&mut self, v: f64) {
        if self.kahan {
            let y = v - self.comp;
            let t = self.sum + y;
            self.comp = (t - self.sum) - y;
            self.sum = t;
        } else {
            self.sum += v;
        }
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum
    }
}

/// One expectation term F(x, ξ) of a problem.
pub trait Component: Send + Sync {
    /// Single-scenario observation: return F(x, ξ) for the scenario encoded
    /// by `rng`'s position and add `weight`·(a subgradient of F(·, ξ) at x)
    /// into `grad`. May consume at most eight 64-bit draws.
    fn sample(&self, x: &[f64], rng: &mut ChaCha8Rng, weight: f64, grad: &mut [f64]) -> f64;

    /// Exact value of f(x) = E[F(x, ξ)] plus `weight`·subgradient into
    /// `grad`, when the expectation is computable. `None` when only sampling
    /// is available.
    fn exact(&self, x: &[f64], weight: f64, grad: &mut [f64]) -> Option<f64>;

    /// Whether [`Component::exact`] returns values.
    fn has_exact(&self) -> bool;
}

/// Finite-support expectation: the uniform average of `count` per-point
/// terms. Sampling draws a point index; the exact path enumerates the
/// support with the same accumulation policy as batch means, so a full-
/// support enumeration and the exact value agree bit for bit.
pub struct FiniteSum<F> {
    count: usize,
    point: F,
}

impl<F> FiniteSum<F>
where
    F: Fn(&[f64], usize, f64, &mut [f64]) -> f64 + Send + Sync,
{
    /// `point(x, idx, weight, grad)` evaluates the idx-th term and adds
    /// `weight`·(its subgradient) into `grad`.
    pub fn new(count: usize, point: F) -> Result<Self> {
        if count == 0 {
            return Err(SlevelError::InvalidArgument(
                "finite-sum component needs at least one point".into(),
            ));
        }
        Ok(Self { count, point })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Shared enumeration used by `exact`; kept separate so tests can check
    /// the bit-for-bit parity between enumeration and the exact path.
    pub(crate) fn mean_over_support(&self, x: &[f64], weight: f64, grad: &mut [f64]) -> f64 {
        let mut acc = MeanSum::new(self.count > KAHAN_THRESHOLD);
        let w_each = weight / self.count as f64;
        for idx in 0..self.count {
            acc.add((self.point)(x, idx, w_each, grad));
        }
        acc.value() / self.count as f64
    }
}

impl<F> Component for FiniteSum<F>
where
    F: Fn(&[f64], usize, f64, &mut [f64]) -> f64 + Send + Sync,
{
    fn sample(&self, x: &[f64], rng: &mut ChaCha8Rng, weight: f64, grad: &mut [f64]) -> f64 {
        let idx = rng::index_below(rng, self.count);
        (self.point)(x, idx, weight, grad)
    }

    fn exact(&self, x: &[f64], weight: f64, grad: &mut [f64]) -> Option<f64> {
        Some(self.mean_over_support(x, weight, grad))
    }

    fn has_exact(&self) -> bool {
        true
    }
}

/// Deterministic expectation with optional zero-mean uniform observation
/// noise on sampled values. With `noise = 0` the sampler returns exactly the
/// closed-form value (it still consumes its draw, keeping stream positions
/// identical across noise settings).
pub struct ClosedForm<V> {
    eval: V,
    noise: f64,
}

impl<V> ClosedForm<V>
where
    V: Fn(&[f64], f64, &mut [f64]) -> f64 + Send + Sync,
{
    /// `eval(x, weight, grad)` returns f(x) and adds `weight`·∇f(x) into grad.
    pub fn new(eval: V, noise: f64) -> Result<Self> {
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(SlevelError::InvalidArgument(format!(
                "noise amplitude must be finite and ≥ 0, got {noise}"
            )));
        }
        Ok(Self { eval, noise })
    }
}

impl<V> Component for ClosedForm<V>
where
    V: Fn(&[f64], f64, &mut [f64]) -> f64 + Send + Sync,
{
    fn sample(&self, x: &[f64], rng: &mut ChaCha8Rng, weight: f64, grad: &mut [f64]) -> f64 {
        let v = (self.eval)(x, weight, grad);
        v + rng::uniform(rng, -self.noise, self.noise)
    }

    fn exact(&self, x: &[f64], weight: f64, grad: &mut [f64]) -> Option<f64> {
        Some((self.eval)(x, weight, grad))
    }

    fn has_exact(&self) -> bool {
        true
    }
}

/// How to evaluate exact-expectation quantities (component values, P, metrics).
#[derive(Debug, Clone, Copy)]
pub enum EvalMode {
    /// Use exact evaluators; errors if any component lacks one.
    Exact,
    /// Sample-average approximation on a dedicated evaluation stream.
    Saa { samples: usize, seed: u64 },
}

/// A convex stochastic program: minimize f₀(x) = E[F₀(x, ξ₀)] over the
/// domain subject to fᵢ(x) = E[Fᵢ(x, ξᵢ)] ≤ rᵢ for i = 1..m.
pub struct SoecProblem {
    name: String,
    domain: DomainSpec,
    thresholds: Vec<f64>,
    components: Vec<Box<dyn Component>>,
    objective_sign: f64,
    initial_point: Option<Vec<f64>>,
    dataset_size: f64,
    default_saa_samples: usize,
}

impl SoecProblem {
    /// `components[0]` is the objective; `components[1..]` pair up with
    /// `thresholds`.
    pub fn new(
        name: impl Into<String>,
        domain: DomainSpec,
        components: Vec<Box<dyn Component>>,
        thresholds: Vec<f64>,
    ) -> Result<Self> {
        if components.len() != thresholds.len() + 1 || thresholds.is_empty() {
            return Err(SlevelError::InvalidArgument(format!(
                "need one objective and m ≥ 1 constraints; got {} components and {} thresholds",
                components.len(),
                thresholds.len()
            )));
        }
        if !linalg::all_finite(&thresholds) {
            return Err(SlevelError::InvalidArgument("thresholds must be finite".into()));
        }
        let dataset_size = (components.len()) as f64;
        Ok(Self {
            name: name.into(),
            domain,
            thresholds,
            components,
            objective_sign: 1.0,
            initial_point: None,
            dataset_size,
            default_saa_samples: 10_000,
        })
    }

    /// Record that the native formulation maximizes: internally everything
    /// minimizes −objective, and reported objectives are un-negated.
    pub fn with_maximization(mut self) -> Self {
        self.objective_sign = -1.0;
        self
    }

    /// A known-feasible starting point, used for starting-level selection and
    /// as the deterministic baseline's warm start.
    pub fn with_initial_point(mut self, x: Vec<f64>) -> Self {
        debug_assert_eq!(x.len(), self.dim());
        self.initial_point = Some(x);
        self
    }

    /// Scenario consumptions that make up one "data pass" (dataset size for
    /// finite-sum problems; one scenario per stream otherwise).
    pub fn with_dataset_size(mut self, size: f64) -> Self {
        debug_assert!(size > 0.0);
        self.dataset_size = size;
        self
    }

    pub fn with_default_saa_samples(mut self, samples: usize) -> Self {
        debug_assert!(samples > 0);
        self.default_saa_samples = samples;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn num_constraints(&self) -> usize {
        self.thresholds.len()
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn objective_sign(&self) -> f64 {
        self.objective_sign
    }

    pub fn initial_point(&self) -> Option<&[f64]> {
        self.initial_point.as_deref()
    }

    pub fn dataset_size(&self) -> f64 {
        self.dataset_size
    }

    pub fn default_saa_samples(&self) -> usize {
        self.default_saa_samples
    }

    pub fn has_exact(&self) -> bool {
        self.components.iter().all(|c| c.has_exact())
    }

    /// Threshold for the max-form at a given level: the level itself for the
    /// objective (i = 0), rᵢ for constraint i ≥ 1.
    pub fn shifted_threshold(&self, i: usize, level: f64) -> f64 {
        if i == 0 {
            level
        } else {
            self.thresholds[i - 1]
        }
    }

    /// Single-scenario observation of component `i`.
    pub fn component_sample(
        &self,
        i: usize,
        x: &[f64],
        rng: &mut ChaCha8Rng,
        weight: f64,
        grad: &mut [f64],
    ) -> Result<f64> {
        let v = self.components[i].sample(x, rng, weight, grad);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(SlevelError::NonFinite { component: i, context: "sampled value".into() })
        }
    }

    /// Exact fᵢ(x) plus `weight`·subgradient into `grad`.
    pub fn component_exact(
        &self,
        i: usize,
        x: &[f64],
        weight: f64,
        grad: &mut [f64],
    ) -> Result<f64> {
        match self.components[i].exact(x, weight, grad) {
            Some(v) if v.is_finite() => Ok(v),
            Some(_) => {
                Err(SlevelError::NonFinite { component: i, context: "exact value".into() })
            }
            None => Err(SlevelError::ExactUnavailable(format!(
                "component {i} of '{}' has no exact evaluator",
                self.name
            ))),
        }
    }

    /// fᵢ(x) under the given evaluation mode, plus `weight`·subgradient.
    pub fn component_value(
        &self,
        i: usize,
        x: &[f64],
        mode: EvalMode,
        weight: f64,
        grad: &mut [f64],
    ) -> Result<f64> {
        match mode {
            EvalMode::Exact => self.component_exact(i, x, weight, grad),
            EvalMode::Saa { samples, seed } => {
                if samples == 0 {
                    return Err(SlevelError::InvalidArgument(
                        "SAA evaluation needs at least one sample".into(),
                    ));
                }
                let mut stream = ScenarioStream::new(seed, i);
                let mut acc = MeanSum::new(samples > KAHAN_THRESHOLD);
                let w_each = weight / samples as f64;
                for k in 0..samples {
                    acc.add(self.component_sample(i, x, stream.scenario(k as u64), w_each, grad)?);
                }
                Ok(acc.value() / samples as f64)
            }
        }
    }

    /// All component values f₀(x), …, f_m(x) under one evaluation mode.
    pub fn values(&self, x: &[f64], mode: EvalMode) -> Result<Vec<f64>> {
        let mut scratch = vec![0.0; self.dim()];
        (0..self.components.len())
            .map(|i| self.component_value(i, x, mode, 0.0, &mut scratch))
            .collect()
    }

    /// Evaluation mode for metrics snapshots: exact when available, otherwise
    /// SAA on a dedicated evaluation stream (never the optimization stream).
    pub fn metrics_mode(&self, seed: u64, tag: u64) -> EvalMode {
        if self.has_exact() {
            EvalMode::Exact
        } else {
            EvalMode::Saa {
                samples: self.default_saa_samples,
                seed: rng::mix3(seed, rng::salt::EVAL, tag),
            }
        }
    }
}

/// The pointwise max of shifted component values at a level:
/// P(r, x) = max{f₀(x) − r, f₁(x) − r₁, …, f_m(x) − r_m}.
#[derive(Debug, Clone)]
pub struct PEvaluation {
    pub value: f64,
    /// Index attaining the max; ties resolve to the lowest index.
    pub argmax: usize,
    /// All shifted values fᵢ(x) − rᵢ (r₀ = level).
    pub shifted: Vec<f64>,
    /// Sample count when evaluated by SAA, `None` for exact.
    pub saa_samples: Option<usize>,
}

/// Evaluate P(level, x) under the given mode.
pub fn evaluate_p(
    problem: &SoecProblem,
    level: f64,
    x: &[f64],
    mode: EvalMode,
) -> Result<PEvaluation> {
    let values = problem.values(x, mode)?;
    let shifted: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, v)| v - problem.shifted_threshold(i, level))
        .collect();
    let (argmax, value) = shifted
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        });
    let saa_samples = match mode {
        EvalMode::Exact => None,
        EvalMode::Saa { samples, .. } => Some(samples),
    };
    Ok(PEvaluation { value, argmax, shifted, saa_samples })
}

/// Optimality reference for relative gaps: gaps are measured against `f_star`
/// and normalized by `baseline − f_star` (both in minimization units).
#[derive(Debug, Clone, Copy)]
pub struct Reference {
    pub f_star: f64,
    pub baseline: f64,
}

impl Reference {
    pub fn new(f_star: f64, baseline: f64) -> Result<Self> {
        if !(baseline > f_star) {
            return Err(SlevelError::InvalidArgument(format!(
                "reference baseline {baseline} must exceed f* {f_star}"
            )));
        }
        Ok(Self { f_star, baseline })
    }
}

/// Solution-quality snapshot at one point.
#[derive(Debug, Clone)]
pub struct QualityMetrics {
    /// Objective in the problem's native orientation (un-negated for
    /// maximization problems).
    pub objective: f64,
    /// max over constraints of fᵢ(x) − rᵢ; ≤ 0 means feasible.
    pub max_violation: f64,
    /// (f₀(x) − f*) / (baseline − f*) when a reference is available.
    pub relative_gap: Option<f64>,
    /// Sample count when values came from SAA.
    pub saa_samples: Option<usize>,
}

/// Compute objective, worst constraint violation, and (optionally) the
/// relative optimality gap at `x`.
pub fn compute_metrics(
    problem: &SoecProblem,
    x: &[f64],
    mode: EvalMode,
    reference: Option<&Reference>,
) -> Result<QualityMetrics> {
    let values = problem.values(x, mode)?;
    let max_violation = values[1..]
        .iter()
        .zip(problem.thresholds())
        .map(|(v, r)| v - r)
        .fold(f64::NEG_INFINITY, f64::max);
    let relative_gap =
        reference.map(|r| (values[0] - r.f_star) / (r.baseline - r.f_star));
    let saa_samples = match mode {
        EvalMode::Exact => None,
        EvalMode::Saa { samples, .. } => Some(samples),
    };
    Ok(QualityMetrics {
        objective: problem.objective_sign() * values[0],
        max_violation,
        relative_gap,
        saa_samples,
    })
}

/// The saddle reformulation of the level-set subproblem at a fixed level:
/// H(r) = min_x max_y Σᵢ yᵢ·(fᵢ(x) − rᵢ) with r₀ = r and y on the simplex.
pub struct SaddleFunction<'p> {
    problem: &'p SoecProblem,
    pub level: f64,
}

/// Batch-mean stochastic saddle subgradient at (x, y).
#[derive(Debug, Clone)]
pub struct SaddleSample {
    /// Sampled saddle value Φ̂ = Σᵢ yᵢ·(F̄ᵢ − rᵢ); equals y·grad_y exactly.
    pub phi_hat: f64,
    /// Primal block G_x = Σᵢ yᵢ·(batch-mean subgradient of Fᵢ).
    pub grad_x: Vec<f64>,
    /// Dual block G_y with (G_y)ᵢ = F̄ᵢ − rᵢ.
    pub grad_y: Vec<f64>,
    /// Scenario draws consumed ((m+1)·batch).
    pub scenarios: u64,
}

impl<'p> SaddleFunction<'p> {
    pub fn new(problem: &'p SoecProblem, level: f64) -> Self {
        Self { problem, level }
    }

    pub fn problem(&self) -> &'p SoecProblem {
        self.problem
    }

    /// One batch-mean saddle subgradient. `streams` holds one scenario stream
    /// per component; the batch reads scenario indices
    /// `start .. start + batch` from each.
    pub fn sample_subgradient(
        &self,
        x: &[f64],
        y: &[f64],
        batch: usize,
        streams: &mut [ScenarioStream],
        start: u64,
    ) -> Result<SaddleSample> {
        let p = self.problem;
        let m = p.num_constraints();
        if batch == 0 {
            return Err(SlevelError::InvalidArgument("batch size must be ≥ 1".into()));
        }
        if y.len() != m + 1 || streams.len() != m + 1 {
            return Err(SlevelError::InvalidArgument(format!(
                "need {} dual coordinates and streams, got {} and {}",
                m + 1,
                y.len(),
                streams.len()
            )));
        }
        if !p.domain().contains(x, 1e-9) {
            return Err(SlevelError::InvalidArgument(
                "primal point lies outside the domain (tolerance 1e-9)".into(),
            ));
        }
        let ysum: f64 = y.iter().sum();
        if (ysum - 1.0).abs() > 1e-12 || y.iter().any(|v| *v < -1e-12) {
            return Err(SlevelError::InvalidArgument(
                "dual point is not on the probability simplex (tolerance 1e-12)".into(),
            ));
        }

        let mut grad_x = vec![0.0; p.dim()];
        let mut grad_y = vec![0.0; m + 1];
        let kahan = batch > KAHAN_THRESHOLD;
        for (i, stream) in streams.iter_mut().enumerate() {
            let mut acc = MeanSum::new(kahan);
            let w_each = y[i] / batch as f64;
            for k in 0..batch {
                let rng = stream.scenario(start + k as u64);
                acc.add(p.component_sample(i, x, rng, w_each, &mut grad_x)?);
            }
            grad_y[i] = acc.value() / batch as f64 - p.shifted_threshold(i, self.level);
            if !linalg::all_finite(&grad_x) {
                return Err(SlevelError::NonFinite {
                    component: i,
                    context: "batch-mean subgradient".into(),
                });
            }
        }
        let phi_hat = linalg::dot(y, &grad_y);
        Ok(SaddleSample {
            phi_hat,
            grad_x,
            grad_y,
            scenarios: ((m + 1) * batch) as u64,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;
    use approx::assert_relative_eq;

    /// The 1-D toy: minimize x on [0,2] subject to 1 − x ≤ 0.
    fn toy() -> SoecProblem {
        let f0 = ClosedForm::new(
            |x: &[f64], w: f64, g: &mut [f64]| {
                g[0] += w;
                x[0]
            },
            0.0,
        )
        .unwrap();
        let f1 = ClosedForm::new(
            |x: &[f64], w: f64, g: &mut [f64]| {
                g[0] -= w;
                1.0 - x[0]
            },
            0.0,
        )
        .unwrap();
        SoecProblem::new(
            "toy",
            DomainSpec::interval(0.0, 2.0).unwrap(),
            vec![Box::new(f0), Box::new(f1)],
            vec![0.0],
        )
        .unwrap()
    }

    #[test]
    fn saddle_subgradient_hand_values() {
        let p = toy();
        let sf = SaddleFunction::new(&p, 2.0);
        let mut streams = vec![ScenarioStream::new(1, 0), ScenarioStream::new(1, 1)];
        let s = sf
            .sample_subgradient(&[0.5], &[0.5, 0.5], 4, &mut streams, 0)
            .unwrap();
        // f₀(0.5) − r = 0.5 − 2 = −1.5; f₁(0.5) − r₁ = 0.5 − 0 = 0.5.
        assert_relative_eq!(s.grad_y[0], -1.5, max_relative = 1e-15);
        assert_relative_eq!(s.grad_y[1], 0.5, max_relative = 1e-15);
        // G_x = 0.5·(+1) + 0.5·(−1) = 0.
        assert_relative_eq!(s.grad_x[0], 0.0, epsilon = 1e-15);
        // Φ̂ = y·G_y by construction.
        assert_relative_eq!(s.phi_hat, -0.5, max_relative = 1e-15);
        assert_eq!(s.scenarios, 8);
    }

    #[test]
    fn saddle_subgradient_at_vertex_uses_single_component() {
        let p = toy();
        let sf = SaddleFunction::new(&p, 2.0);
        let mut streams = vec![ScenarioStream::new(1, 0), ScenarioStream::new(1, 1)];
        let s = sf
            .sample_subgradient(&[0.5], &[1.0, 0.0], 1, &mut streams, 0)
            .unwrap();
        assert_relative_eq!(s.grad_x[0], 1.0, max_relative = 1e-15);
        assert_relative_eq!(s.phi_hat, -1.5, max_relative = 1e-15);
    }

    #[test]
    fn saddle_subgradient_rejects_bad_inputs() {
        let p = toy();
        let sf = SaddleFunction::new(&p, 2.0);
        let mut streams = vec![ScenarioStream::new(1, 0), ScenarioStream::new(1, 1)];
        // Outside the domain.
        assert!(sf
            .sample_subgradient(&[3.0], &[0.5, 0.5], 1, &mut streams, 0)
            .is_err());
        // Off the simplex.
        assert!(sf
            .sample_subgradient(&[0.5], &[0.7, 0.7], 1, &mut streams, 0)
            .is_err());
        // Empty batch.
        assert!(sf
            .sample_subgradient(&[0.5], &[0.5, 0.5], 0, &mut streams, 0)
            .is_err());
    }

    #[test]
    fn evaluate_p_hand_values() {
        let p = toy();
        // P(2, 0.75) = max(0.75 − 2, 1 − 0.75) = 0.25, attained by the constraint.
        let e = evaluate_p(&p, 2.0, &[0.75], EvalMode::Exact).unwrap();
        assert_relative_eq!(e.value, 0.25, max_relative = 1e-15);
        assert_eq!(e.argmax, 1);
        assert!(e.saa_samples.is_none());
        // At the optimum with r = f* = 1 both terms vanish; ties pick index 0.
        let e = evaluate_p(&p, 1.0, &[1.0], EvalMode::Exact).unwrap();
        assert_relative_eq!(e.value, 0.0, epsilon = 1e-15);
        assert_eq!(e.argmax, 0);
    }

    #[test]
    fn zero_noise_sampler_equals_exact_bitwise() {
        let p = toy();
        let mut stream = ScenarioStream::new(9, 0);
        let mut g1 = vec![0.0];
        let mut g2 = vec![0.0];
        for k in 0..50u64 {
            let a = p
                .component_sample(0, &[1.25], stream.scenario(k), 1.0, &mut g1)
                .unwrap();
            let b = p.component_exact(0, &[1.25], 1.0, &mut g2).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn finite_sum_exact_matches_enumeration_bit_for_bit() {
        // Support values 0.3·(idx+1) with gradient idx in coordinate 0.
        let fs = FiniteSum::new(37, |_x: &[f64], idx: usize, w: f64, g: &mut [f64]| {
            g[0] += w * idx as f64;
            0.3 * (idx + 1) as f64
        })
        .unwrap();
        let x = [0.0];
        let mut g_exact = vec![0.0];
        let exact = fs.exact(&x, 2.0, &mut g_exact).unwrap();

        // Manual enumeration replicating the accumulation policy.
        let mut acc = MeanSum::new(false);
        let mut g_manual = [0.0];
        let w_each = 2.0 / 37.0;
        for idx in 0..37 {
            g_manual[0] += w_each * idx as f64;
            acc.add(0.3 * (idx + 1) as f64);
        }
        assert_eq!(exact.to_bits(), (acc.value() / 37.0).to_bits());
        assert_eq!(g_exact[0].to_bits(), g_manual[0].to_bits());
    }

    #[test]
    fn kahan_kicks_in_above_threshold() {
        // One huge point plus many ones: plain sequential summation loses the
        // ones entirely (ulp(1e16) = 2 and ties round to even), Kahan keeps them.
        let n = KAHAN_THRESHOLD + 1;
        let point = move |_x: &[f64], idx: usize, _w: f64, _g: &mut [f64]| {
            if idx == 0 {
                1e16
            } else {
                1.0
            }
        };
        let fs = FiniteSum::new(n, point).unwrap();
        let mut g = vec![0.0];
        let mean = fs.exact(&[0.0], 0.0, &mut g).unwrap();
        let expected = (1e16 + (n as f64 - 1.0)) / n as f64;
        assert_relative_eq!(mean, expected, max_relative = 1e-15);

        // Below the threshold the plain sum drops the small terms.
        let fs_plain = FiniteSum::new(KAHAN_THRESHOLD, point).unwrap();
        let mean_plain = fs_plain.exact(&[0.0], 0.0, &mut g).unwrap();
        assert_relative_eq!(mean_plain, 1e16 / KAHAN_THRESHOLD as f64, max_relative = 1e-15);
    }

    #[test]
    fn metrics_hand_values() {
        let p = toy();
        let reference = Reference::new(1.0, 2.0).unwrap();
        let m = compute_metrics(&p, &[1.2], EvalMode::Exact, Some(&reference)).unwrap();
        assert_relative_eq!(m.objective, 1.2, max_relative = 1e-15);
        // f₁(1.2) − 0 = −0.2: feasible with margin.
        assert_relative_eq!(m.max_violation, -0.2, max_relative = 1e-14);
        assert_relative_eq!(m.relative_gap.unwrap(), 0.2, max_relative = 1e-12);
        // At the baseline point the gap is 1 by construction.
        let m0 = compute_metrics(&p, &[2.0], EvalMode::Exact, Some(&reference)).unwrap();
        assert_relative_eq!(m0.relative_gap.unwrap(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn maximization_reports_unnegated_objective() {
        let f0 = ClosedForm::new(
            |x: &[f64], w: f64, g: &mut [f64]| {
                g[0] -= w;
                -x[0]
            },
            0.0,
        )
        .unwrap();
        let f1 = ClosedForm::new(|_: &[f64], _: f64, _: &mut [f64]| 0.0, 0.0).unwrap();
        let p = SoecProblem::new(
            "max-x",
            DomainSpec::interval(0.0, 2.0).unwrap(),
            vec![Box::new(f0), Box::new(f1)],
            vec![1.0],
        )
        .unwrap()
        .with_maximization();
        let m = compute_metrics(&p, &[1.5], EvalMode::Exact, None).unwrap();
        assert_relative_eq!(m.objective, 1.5, max_relative = 1e-15);
        assert!(m.relative_gap.is_none());
    }

    #[test]
    fn saa_evaluation_is_deterministic_and_converges_for_constants() {
        let p = toy();
        let mode = EvalMode::Saa { samples: 64, seed: 123 };
        let a = p.values(&[0.5], mode).unwrap();
        let b = p.values(&[0.5], mode).unwrap();
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        // Noise-free components: SAA equals exact regardless of sample count.
        assert_relative_eq!(a[0], 0.5, max_relative = 1e-15);
        assert_relative_eq!(a[1], 0.5, max_relative = 1e-15);
    }

    #[test]
    fn problem_construction_validations() {
        let f0 = ClosedForm::new(|_: &[f64], _: f64, _: &mut [f64]| 0.0, 0.0).unwrap();
        // No constraints.
        assert!(SoecProblem::new(
            "bad",
            DomainSpec::interval(0.0, 1.0).unwrap(),
            vec![Box::new(f0)],
            vec![],
        )
        .is_err());
        assert!(ClosedForm::new(|_: &[f64], _: f64, _: &mut [f64]| 0.0, -1.0).is_err());
        assert!(
            FiniteSum::new(0, |_: &[f64], _: usize, _: f64, _: &mut [f64]| 0.0).is_err()
        );
    }
}

//! Multi-class Neyman-Pearson classification.
//!
//! With K classes, one linear model x_c per class (stacked into one primal
//! vector), and ψ a feature vector drawn uniformly from class c's dataset,
//! the class-c risk is
//!
//! f_c(x) = Σ_{l≠c} E_ψ[(1 − (x_c − x_l)ᵀψ)₊].
//!
//! The objective minimizes the class-0 risk; for every other class the risk
//! is constrained by K − 1, which the all-zero model meets with equality.
//! Each model lives in a Euclidean ball of radius λ, and every component has
//! an exact finite-sum evaluator.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::DomainSpec;
use crate::error::{Result, SlevelError};
use crate::linalg;
use crate::problem::{Component, FiniteSum, SoecProblem};
use crate::rng;

/// Per-class dense feature rows plus the shared model geometry.
struct NpShared {
    /// classes[c] is a row-major (count × dim) feature table.
    classes: Vec<Vec<f64>>,
    counts: Vec<usize>,
    dim: usize,
}

impl NpShared {
    fn row(&self, class: usize, idx: usize) -> &[f64] {
        &self.classes[class][idx * self.dim..(idx + 1) * self.dim]
    }
}

/// One scenario of the class-c risk: the pairwise hinge sum at a sampled
/// feature row, with its subgradient.
fn np_point(shared: &NpShared, class: usize, x: &[f64], idx: usize, weight: f64, grad: &mut [f64]) -> f64 {
    let d = shared.dim;
    let k = shared.counts.len();
    let psi = shared.row(class, idx);
    let dot_c = linalg::dot(&x[class * d..(class + 1) * d], psi);
    let mut value = 0.0;
    for l in 0..k {
        if l == class {
            continue;
        }
        let dot_l = linalg::dot(&x[l * d..(l + 1) * d], psi);
        let margin = 1.0 - dot_c + dot_l;
        if margin > 0.0 {
            value += margin;
            for j in 0..d {
                grad[class * d + j] -= weight * psi[j];
                grad[l * d + j] += weight * psi[j];
            }
        }
    }
    value
}

/// Specification of a multi-class Neyman-Pearson instance.
#[derive(Debug, Clone)]
pub struct MulticlassNpSpec {
    /// Dense feature rows per class (the paper's per-class datasets).
    pub classes: Vec<Vec<Vec<f64>>>,
    /// Ball radius λ for every per-class model.
    pub radius: f64,
}

impl MulticlassNpSpec {
    /// Synthetic K-Gaussian instance: class means sit on a circle of radius
    /// `spread` (in the first two feature coordinates) with unit normal
    /// noise. Deterministic in `seed`.
    pub fn synthetic_gaussians(
        num_classes: usize,
        points_per_class: usize,
        dim: usize,
        spread: f64,
        radius: f64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(rng::mix(seed, rng::salt::BUILD));
        let mut classes = Vec::with_capacity(num_classes);
        for c in 0..num_classes {
            let angle = 2.0 * std::f64::consts::PI * c as f64 / num_classes as f64;
            let mut rows = Vec::with_capacity(points_per_class);
            for _ in 0..points_per_class {
                let mut row = vec![0.0; dim];
                for (j, v) in row.iter_mut().enumerate() {
                    *v = standard_normal(&mut rng)
                        + match j {
                            0 => spread * angle.cos(),
                            1 => spread * angle.sin(),
                            _ => 0.0,
                        };
                }
                rows.push(row);
            }
            classes.push(rows);
        }
        Self { classes, radius }
    }
}

/// One standard normal draw via Box-Muller (deterministic in the rng state).
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Build the SOEC: objective = class-0 risk, constraint i = class-i risk with
/// threshold K − 1, domain = product of K balls of radius λ.
pub fn build_np_multiclass(spec: &MulticlassNpSpec) -> Result<SoecProblem> {
    let k = spec.classes.len();
    if k < 2 {
        return Err(SlevelError::InvalidArgument(format!(
            "multi-class instance needs at least 2 classes, got {k}"
        )));
    }
    if !(spec.radius > 0.0 && spec.radius.is_finite()) {
        return Err(SlevelError::InvalidArgument(format!(
            "model ball radius must be positive, got {}",
            spec.radius
        )));
    }
    let dim = spec
        .classes
        .first()
        .and_then(|c| c.first())
        .map(|r| r.len())
        .unwrap_or(0);
    if dim == 0 {
        return Err(SlevelError::InvalidArgument(
            "every class needs at least one nonempty feature row".into(),
        ));
    }
    let mut classes = Vec::with_capacity(k);
    let mut counts = Vec::with_capacity(k);
    let mut total = 0usize;
    for (c, rows) in spec.classes.iter().enumerate() {
        if rows.is_empty() {
            return Err(SlevelError::InvalidArgument(format!("class {c} has no data points")));
        }
        let mut flat = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(SlevelError::InvalidArgument(format!(
                    "class {c} has a row of length {}, expected {dim}",
                    row.len()
                )));
            }
            if !linalg::all_finite(row) {
                return Err(SlevelError::InvalidArgument(format!(
                    "class {c} contains non-finite features"
                )));
            }
            flat.extend_from_slice(row);
        }
        counts.push(rows.len());
        total += rows.len();
        classes.push(flat);
    }
    let shared = Arc::new(NpShared { classes, counts, dim });

    let mut components: Vec<Box<dyn Component>> = Vec::with_capacity(k);
    for c in 0..k {
        let shared = Arc::clone(&shared);
        components.push(Box::new(FiniteSum::new(
            shared.counts[c],
            move |x: &[f64], idx: usize, w: f64, g: &mut [f64]| np_point(&shared, c, x, idx, w, g),
        )?));
    }

    let domain = DomainSpec::product(vec![DomainSpec::centered_ball(dim, spec.radius)?; k])?;
    let thresholds = vec![(k - 1) as f64; k - 1];
    Ok(SoecProblem::new("np-multiclass", domain, components, thresholds)?
        .with_initial_point(vec![0.0; k * dim])
        .with_dataset_size(total as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{compute_metrics, EvalMode};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn tiny_spec() -> MulticlassNpSpec {
        MulticlassNpSpec {
            classes: vec![
                vec![vec![-1.0, 0.0]],
                vec![vec![0.0, 1.0]],
                vec![vec![1.0, 0.0]],
            ],
            radius: 5.0,
        }
    }

    #[test]
    fn zero_model_sits_exactly_on_the_thresholds() {
        let spec = MulticlassNpSpec::synthetic_gaussians(3, 40, 2, 3.0, 5.0, 1);
        let p = build_np_multiclass(&spec).unwrap();
        assert_eq!(p.num_constraints(), 2);
        assert_eq!(p.dim(), 6);
        let vals = p.values(&[0.0; 6], EvalMode::Exact).unwrap();
        for v in &vals {
            assert_relative_eq!(*v, 2.0, max_relative = 1e-15);
        }
        let m = compute_metrics(&p, &[0.0; 6], EvalMode::Exact, None).unwrap();
        assert_relative_eq!(m.max_violation, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn separable_instance_reaches_zero_risk() {
        // One point per class, separable with margin ≥ 1 by an explicit model
        // inside the ball: every component value vanishes there, so f* = 0.
        let p = build_np_multiclass(&tiny_spec()).unwrap();
        let x = [-2.0, 0.0, 0.0, 2.0, 2.0, 0.0];
        let vals = p.values(&x, EvalMode::Exact).unwrap();
        for v in &vals {
            assert_relative_eq!(*v, 0.0, epsilon = 1e-15);
        }
        // Hinge sums are nonnegative, so this point is optimal.
        assert!(p.domain().contains(&x, 1e-12));
    }

    #[test]
    fn exact_evaluator_is_convex_along_random_segments() {
        let spec = MulticlassNpSpec::synthetic_gaussians(3, 25, 2, 2.0, 5.0, 3);
        let p = build_np_multiclass(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut scratch = vec![0.0; p.dim()];
        for _ in 0..50 {
            let mut a = vec![0.0; p.dim()];
            let mut b = vec![0.0; p.dim()];
            for v in a.iter_mut().chain(b.iter_mut()) {
                *v = rng.random_range(-2.0..2.0);
            }
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            for i in 0..=p.num_constraints() {
                let fa = p.component_exact(i, &a, 0.0, &mut scratch).unwrap();
                let fb = p.component_exact(i, &b, 0.0, &mut scratch).unwrap();
                let fm = p.component_exact(i, &mid, 0.0, &mut scratch).unwrap();
                assert!(fm <= 0.5 * (fa + fb) + 1e-9, "component {i} not convex");
            }
        }
    }

    #[test]
    fn sampler_mean_matches_exact_on_full_support() {
        let p = build_np_multiclass(&tiny_spec()).unwrap();
        // Single-point classes: any sampled scenario equals the exact value.
        let x = [0.3, -0.2, 0.1, 0.4, -0.5, 0.2];
        let exact = p.values(&x, EvalMode::Exact).unwrap();
        let single = p.values(&x, EvalMode::Saa { samples: 1, seed: 5 }).unwrap();
        for (e, s) in exact.iter().zip(&single) {
            assert_eq!(e.to_bits(), s.to_bits());
        }
        // Averaging several identical draws is only exact up to summation
        // rounding (a couple of ulps), not bit-for-bit.
        let saa = p.values(&x, EvalMode::Saa { samples: 8, seed: 5 }).unwrap();
        for (e, s) in exact.iter().zip(&saa) {
            assert_relative_eq!(*e, *s, max_relative = 1e-14);
        }
    }

    #[test]
    fn synthetic_generator_is_deterministic() {
        let a = MulticlassNpSpec::synthetic_gaussians(3, 10, 2, 3.0, 5.0, 7);
        let b = MulticlassNpSpec::synthetic_gaussians(3, 10, 2, 3.0, 5.0, 7);
        assert_eq!(a.classes, b.classes);
        let c = MulticlassNpSpec::synthetic_gaussians(3, 10, 2, 3.0, 5.0, 8);
        assert_ne!(a.classes, c.classes);
        assert_eq!(a.classes.len(), 3);
        assert_eq!(a.classes[0].len(), 10);
        assert_eq!(a.classes[0][0].len(), 2);
    }

    #[test]
    fn rejects_degenerate_specs() {
        assert!(build_np_multiclass(&MulticlassNpSpec { classes: vec![], radius: 1.0 }).is_err());
        assert!(build_np_multiclass(&MulticlassNpSpec {
            classes: vec![vec![vec![1.0]], vec![]],
            radius: 1.0,
        })
        .is_err());
        assert!(build_np_multiclass(&MulticlassNpSpec {
            classes: vec![vec![vec![1.0]], vec![vec![1.0, 2.0]]],
            radius: 1.0,
        })
        .is_err());
        let mut spec = tiny_spec();
        spec.radius = 0.0;
        assert!(build_np_multiclass(&spec).is_err());
    }
}

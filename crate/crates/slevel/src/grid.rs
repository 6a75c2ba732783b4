//! Brute-force evaluation of the level-set function for low-dimensional
//! problems: H(r) = min over the domain of P(r, x).
//!
//! Used for diagnostics and ground truth on toy problems (dimension ≤ 3). A
//! coarse grid scan over the domain keeps a global incumbent; the actual
//! minimization is a nested golden-section search, one coordinate per level
//! of the recursion. P(r, ·) is jointly convex and partial minimization
//! preserves convexity, so every one-dimensional slice function is unimodal
//! and the recursion reaches the global minimum to line-search tolerance —
//! including minimizers on kinks of the max, where per-axis coordinate
//! descent would stall.

use crate::domain::DomainSpec;
use crate::error::{Result, SlevelError};
use crate::problem::{evaluate_p, EvalMode, SoecProblem};

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const LINE_TOL: f64 = 1e-10;

/// Feasible interval of coordinate `axis` when coordinates `0..axis` are
/// fixed to `point[..axis]` and the remaining ones stay free: the projection
/// of the corresponding domain slice onto that axis.
fn axis_interval(domain: &DomainSpec, point: &[f64], axis: usize) -> (f64, f64) {
    match domain {
        DomainSpec::Box { lower, upper } => (lower[axis], upper[axis]),
        DomainSpec::Ball { center, radius } => {
            let mut residual_sq = radius * radius;
            for j in 0..axis {
                let d = point[j] - center[j];
                residual_sq -= d * d;
            }
            let half = residual_sq.max(0.0).sqrt();
            (center[axis] - half, center[axis] + half)
        }
        DomainSpec::Product(factors) => {
            let mut offset = 0;
            for factor in factors {
                let d = factor.dim();
                if axis < offset + d {
                    return axis_interval(factor, &point[offset..offset + d], axis - offset);
                }
                offset += d;
            }
            unreachable!("axis {axis} out of range for product domain")
        }
    }
}

/// A located minimum of P(r, ·).
#[derive(Debug, Clone)]
pub struct GridMinimum {
    pub value: f64,
    pub point: Vec<f64>,
}

/// Grid + refinement evaluator of H over one problem.
pub struct GridEvaluator<'p> {
    problem: &'p SoecProblem,
    mode: EvalMode,
    resolution: usize,
}

impl<'p> GridEvaluator<'p> {
    /// `resolution` is the number of grid points per axis (≥ 2); total work
    /// scales as resolution^dim.
    pub fn new(problem: &'p SoecProblem, mode: EvalMode, resolution: usize) -> Result<Self> {
        let dim = problem.dim();
        if dim == 0 || dim > 3 {
            return Err(SlevelError::Unsupported(format!(
                "grid evaluation handles 1–3 dimensions, problem '{}' has {dim}",
                problem.name()
            )));
        }
        if resolution < 2 {
            return Err(SlevelError::InvalidArgument(
                "grid resolution must be at least 2 points per axis".into(),
            ));
        }
        Ok(Self { problem, mode, resolution })
    }

    fn p_at(&self, level: f64, point: &[f64]) -> Result<f64> {
        let mut z = point.to_vec();
        self.problem.domain().project(&mut z);
        Ok(evaluate_p(self.problem, level, &z, self.mode)?.value)
    }

    /// H(level) with the approximate minimizer.
    pub fn level_value(&self, level: f64) -> Result<GridMinimum> {
        let (lower, upper) = self.problem.domain().bounding_box();
        let dim = self.problem.dim();
        let res = self.resolution;

        let mut best_value = f64::INFINITY;
        let mut best_point = lower.clone();
        let mut point = vec![0.0; dim];
        let cells = res.pow(dim as u32);
        for flat in 0..cells {
            let mut rem = flat;
            for axis in 0..dim {
                let step = rem % res;
                rem /= res;
                let frac = step as f64 / (res - 1) as f64;
                point[axis] = lower[axis] + frac * (upper[axis] - lower[axis]);
            }
            let v = self.p_at(level, &point)?;
            if v < best_value {
                best_value = v;
                best_point.copy_from_slice(&point);
            }
        }

        // Nested golden-section over the domain slices, keeping whichever of
        // the scan incumbent and the recursion's best visited point wins.
        let mut incumbent = GridMinimum { value: best_value, point: best_point };
        self.slice_min(level, &mut point, 0, &mut incumbent)?;
        self.problem.domain().project(&mut incumbent.point);
        Ok(incumbent)
    }

    /// Minimize P(level, ·) over the slice where coordinates `0..axis` of
    /// `point` are fixed, by golden section on coordinate `axis` of the
    /// partially minimized (convex, hence unimodal) slice function. Updates
    /// `best` with every full point visited.
    fn slice_min(
        &self,
        level: f64,
        point: &mut Vec<f64>,
        axis: usize,
        best: &mut GridMinimum,
    ) -> Result<f64> {
        if axis == self.problem.dim() {
            let v = self.p_at(level, point)?;
            if v < best.value {
                best.value = v;
                best.point.copy_from_slice(point);
            }
            return Ok(v);
        }
        let (mut lo, mut hi) = axis_interval(self.problem.domain(), point, axis);
        if !(hi - lo > LINE_TOL) {
            point[axis] = 0.5 * (lo + hi);
            return self.slice_min(level, point, axis + 1, best);
        }
        let mut c = hi - INV_PHI * (hi - lo);
        let mut d = lo + INV_PHI * (hi - lo);
        point[axis] = c;
        let mut fc = self.slice_min(level, point, axis + 1, best)?;
        point[axis] = d;
        let mut fd = self.slice_min(level, point, axis + 1, best)?;
        while hi - lo > LINE_TOL {
            if fc <= fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - INV_PHI * (hi - lo);
                point[axis] = c;
                fc = self.slice_min(level, point, axis + 1, best)?;
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + INV_PHI * (hi - lo);
                point[axis] = d;
                fd = self.slice_min(level, point, axis + 1, best)?;
            }
        }
        point[axis] = 0.5 * (lo + hi);
        let fm = self.slice_min(level, point, axis + 1, best)?;
        Ok(fm.min(fc).min(fd))
    }

    /// The optimal objective value f*: the root of the non-increasing
    /// function H on [lo, hi], found by bisection to `tol`.
    pub fn optimal_value(&self, lo: f64, hi: f64, tol: f64) -> Result<f64> {
        if !(lo < hi) || !(tol > 0.0) {
            return Err(SlevelError::InvalidArgument(format!(
                "need lo < hi and tol > 0, got [{lo}, {hi}] and {tol}"
            )));
        }
        let h_lo = self.level_value(lo)?.value;
        let h_hi = self.level_value(hi)?.value;
        if !(h_lo > 0.0 && h_hi < 0.0) {
            return Err(SlevelError::RootNotBracketed(format!(
                "H({lo}) = {h_lo}, H({hi}) = {h_hi}; need H > 0 on the left and H < 0 on the right"
            )));
        }
        let (mut lo, mut hi) = (lo, hi);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.level_value(mid)?.value > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;
    use crate::problem::{ClosedForm, SoecProblem};
    use approx::assert_relative_eq;

    /// Minimize x on [0, 2] subject to 1 − x ≤ 0; H(r) = max(1 − r, 0)/…
    /// piecewise: H(2) = −0.5 at x = 1.5, H(1) = 0, H(0.5) = 0.25.
    fn toy_1d() -> SoecProblem {
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
            "toy-1d",
            DomainSpec::interval(0.0, 2.0).unwrap(),
            vec![Box::new(f0), Box::new(f1)],
            vec![0.0],
        )
        .unwrap()
    }

    #[test]
    fn level_values_match_hand_computation() {
        let p = toy_1d();
        let ev = GridEvaluator::new(&p, EvalMode::Exact, 41).unwrap();
        let h2 = ev.level_value(2.0).unwrap();
        assert_relative_eq!(h2.value, -0.5, epsilon = 1e-8);
        assert_relative_eq!(h2.point[0], 1.5, epsilon = 1e-6);
        assert_relative_eq!(ev.level_value(1.0).unwrap().value, 0.0, epsilon = 1e-8);
        assert_relative_eq!(ev.level_value(0.5).unwrap().value, 0.25, epsilon = 1e-8);
    }

    #[test]
    fn optimal_value_by_bisection() {
        let p = toy_1d();
        let ev = GridEvaluator::new(&p, EvalMode::Exact, 41).unwrap();
        let f_star = ev.optimal_value(0.0, 2.0, 1e-6).unwrap();
        assert_relative_eq!(f_star, 1.0, epsilon = 1e-5);
        // A bracket entirely on one side of the root fails loudly.
        assert!(ev.optimal_value(1.5, 2.0, 1e-6).is_err());
    }

    #[test]
    fn two_dimensional_box_minimum() {
        // Minimize x + y on [0,1]² subject to 1 − x − y ≤ 0. With s = x + y,
        // P(2, ·) = max(s − 2, 1 − s), minimized where the pieces cross:
        // s = 1.5, value −0.5. The optimal value is f* = 1.
        let f0 = ClosedForm::new(
            |x: &[f64], w: f64, g: &mut [f64]| {
                g[0] += w;
                g[1] += w;
                x[0] + x[1]
            },
            0.0,
        )
        .unwrap();
        let f1 = ClosedForm::new(
            |x: &[f64], w: f64, g: &mut [f64]| {
                g[0] -= w;
                g[1] -= w;
                1.0 - x[0] - x[1]
            },
            0.0,
        )
        .unwrap();
        let p = SoecProblem::new(
            "toy-2d",
            DomainSpec::r#box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
            vec![Box::new(f0), Box::new(f1)],
            vec![0.0],
        )
        .unwrap();
        let ev = GridEvaluator::new(&p, EvalMode::Exact, 21).unwrap();
        let h2 = ev.level_value(2.0).unwrap();
        assert_relative_eq!(h2.value, -0.5, epsilon = 1e-7);
        assert_relative_eq!(ev.optimal_value(0.5, 2.0, 1e-6).unwrap(), 1.0, epsilon = 1e-5);
    }

    #[test]
    fn rejects_unsupported_dimensions() {
        let f0 = ClosedForm::new(|_: &[f64], _: f64, _: &mut [f64]| 0.0, 0.0).unwrap();
        let f1 = ClosedForm::new(|_: &[f64], _: f64, _: &mut [f64]| 0.0, 0.0).unwrap();
        let p = SoecProblem::new(
            "toy-4d",
            DomainSpec::centered_ball(4, 1.0).unwrap(),
            vec![Box::new(f0), Box::new(f1)],
            vec![0.0],
        )
        .unwrap();
        assert!(GridEvaluator::new(&p, EvalMode::Exact, 11).is_err());
    }
}

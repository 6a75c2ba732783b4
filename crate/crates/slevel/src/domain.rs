//! Feasible-region descriptions and exact geometric primitives on them.
//!
//! The solver only needs three things from a domain: Euclidean projection
//! (for the primal prox step), exact minimization of a linear function (for
//! the online lower bound), and the range of ω(x) = ½‖x‖² (for the prox
//! diameter). All three have closed forms for balls, boxes, and products of
//! those, which covers every benchmark family here.

use crate::error::{Result, SlevelError};
use crate::linalg;

#[derive(Debug, Clone)]
pub enum DomainSpec {
    /// Euclidean ball { x : ‖x − center‖₂ ≤ radius }.
    Ball { center: Vec<f64>, radius: f64 },
    /// Axis-aligned box { x : lower ≤ x ≤ upper } (coordinatewise).
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Cartesian product of blocks, concatenated in order.
    Product(Vec<DomainSpec>),
}

impl DomainSpec {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) || !linalg::all_finite(&center) {
            return Err(SlevelError::InvalidArgument(format!(
                "ball needs a finite center and radius > 0, got radius {radius}"
            )));
        }
        Ok(DomainSpec::Ball { center, radius })
    }

    pub fn centered_ball(dim: usize, radius: f64) -> Result<Self> {
        Self::ball(vec![0.0; dim], radius)
    }

    pub fn r#box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(SlevelError::InvalidArgument(
                "box bounds need equal, nonzero lengths".into(),
            ));
        }
        if !linalg::all_finite(&lower) || !linalg::all_finite(&upper) {
            return Err(SlevelError::InvalidArgument("box bounds must be finite".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(SlevelError::InvalidArgument(
                "box needs lower ≤ upper in every coordinate".into(),
            ));
        }
        Ok(DomainSpec::Box { lower, upper })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::r#box(vec![lo], vec![hi])
    }

    pub fn product(blocks: Vec<DomainSpec>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(SlevelError::InvalidArgument("product of zero blocks".into()));
        }
        Ok(DomainSpec::Product(blocks))
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Ball { center, .. } => center.len(),
            DomainSpec::Box { lower, .. } => lower.len(),
            DomainSpec::Product(blocks) => blocks.iter().map(DomainSpec::dim).sum(),
        }
    }

    /// In-place Euclidean projection onto the domain.
    pub fn project(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim());
        match self {
            DomainSpec::Ball { center, radius } => {
                let dist = linalg::dist2_sq(x, center).sqrt();
                if dist > *radius {
                    let shrink = radius / dist;
                    for (xi, ci) in x.iter_mut().zip(center) {
                        *xi = ci + (*xi - ci) * shrink;
                    }
                }
            }
            DomainSpec::Box { lower, upper } => {
                for ((xi, l), u) in x.iter_mut().zip(lower).zip(upper) {
                    *xi = xi.clamp(*l, *u);
                }
            }
            DomainSpec::Product(blocks) => {
                let mut offset = 0;
                for b in blocks {
                    let d = b.dim();
                    b.project(&mut x[offset..offset + d]);
                    offset += d;
                }
            }
        }
    }

    /// Membership test with an absolute tolerance.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        debug_assert_eq!(x.len(), self.dim());
        match self {
            DomainSpec::Ball { center, radius } => {
                linalg::dist2_sq(x, center).sqrt() <= radius + tol
            }
            DomainSpec::Box { lower, upper } => x
                .iter()
                .zip(lower)
                .zip(upper)
                .all(|((xi, l), u)| *xi >= l - tol && *xi <= u + tol),
            DomainSpec::Product(blocks) => {
                let mut offset = 0;
                blocks.iter().all(|b| {
                    let d = b.dim();
                    let ok = b.contains(&x[offset..offset + d], tol);
                    offset += d;
                    ok
                })
            }
        }
    }

    /// Exact `min { aᵀx : x ∈ domain }`.
    ///
    /// Ball: aᵀc − radius·‖a‖₂. Box: pick the cheaper endpoint per coordinate.
    /// Product: blocks minimize independently.
    pub fn linear_min(&self, a: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.dim());
        match self {
            DomainSpec::Ball { center, radius } => {
                linalg::dot(a, center) - radius * linalg::norm2(a)
            }
            DomainSpec::Box { lower, upper } => a
                .iter()
                .zip(lower)
                .zip(upper)
                .map(|((ai, l), u)| if *ai >= 0.0 { ai * l } else { ai * u })
                .sum(),
            DomainSpec::Product(blocks) => {
                let mut offset = 0;
                blocks
                    .iter()
                    .map(|b| {
                        let d = b.dim();
                        let v = b.linear_min(&a[offset..offset + d]);
                        offset += d;
                        v
                    })
                    .sum()
            }
        }
    }

    /// Range `(min, max)` of ω(x) = ½‖x‖₂² over the domain.
    pub fn omega_bounds(&self) -> (f64, f64) {
        match self {
            DomainSpec::Ball { center, radius } => {
                let c = linalg::norm2(center);
                let near = (c - radius).max(0.0);
                (0.5 * near * near, 0.5 * (c + radius) * (c + radius))
            }
            DomainSpec::Box { lower, upper } => {
                let mut lo = 0.0;
                let mut hi = 0.0;
                for (l, u) in lower.iter().zip(upper) {
                    let closest = 0.0_f64.clamp(*l, *u);
                    lo += 0.5 * closest * closest;
                    hi += 0.5 * l.abs().max(u.abs()).powi(2);
                }
                (lo, hi)
            }
            DomainSpec::Product(blocks) => blocks
                .iter()
                .map(DomainSpec::omega_bounds)
                .fold((0.0, 0.0), |(alo, ahi), (blo, bhi)| (alo + blo, ahi + bhi)),
        }
    }

    /// Smallest axis-aligned box containing the domain; used by the grid
    /// evaluator.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            DomainSpec::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            DomainSpec::Box { lower, upper } => (lower.clone(), upper.clone()),
            DomainSpec::Product(blocks) => {
                let mut lo = Vec::with_capacity(self.dim());
                let mut hi = Vec::with_capacity(self.dim());
                for b in blocks {
                    let (l, h) = b.bounding_box();
                    lo.extend(l);
                    hi.extend(h);
                }
                (lo, hi)
            }
        }
    }

    /// The domain point minimizing ω(x) = ½‖x‖², i.e. the projection of the
    /// origin. This is the canonical primal starting point.
    pub fn omega_argmin(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.project(&mut x);
        x
    }
}

//! Classification with fairness constraints.
//!
//! A linear classifier x is trained by hinge loss on a labeled dataset D
//! while two group-disparity constraints couple unlabeled datasets D_M and
//! D_F. With κ ∈ (0, 1] and the convex surrogate (z + ½)₊ for the indicator
//! of a positive prediction, the constraints are
//!
//! E_{a∼D_M}[(aᵀx + ½)₊] + (1/κ)·E_{a∼D_F}[(−aᵀx + ½)₊] ≤ 1/κ
//!
//! and symmetrically with the groups swapped. The all-zero classifier has
//! objective exactly 1 and slack (1 − κ)/(2κ) in both constraints.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::DomainSpec;
use crate::error::{Result, SlevelError};
use crate::linalg;
use crate::problem::{Component, FiniteSum, MeanSum, SoecProblem, KAHAN_THRESHOLD};
use crate::rng;

/// Dense row-major feature table.
struct Table {
    data: Vec<f64>,
    dim: usize,
    count: usize,
}

impl Table {
    fn from_rows(rows: &[Vec<f64>], dim: usize, what: &str) -> Result<Self> {
        if rows.is_empty() {
            return Err(SlevelError::InvalidArgument(format!("{what} dataset is empty")));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(SlevelError::InvalidArgument(format!(
                    "{what} row has length {}, expected {dim}",
                    row.len()
                )));
            }
            if !linalg::all_finite(row) {
                return Err(SlevelError::InvalidArgument(format!(
                    "{what} dataset contains non-finite features"
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { data, dim, count: rows.len() })
    }

    fn row(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.dim..(idx + 1) * self.dim]
    }
}

/// One group-disparity constraint: mean of (aᵀx + ½)₊ over `plus` plus
/// (1/κ)·mean of (−aᵀx + ½)₊ over `minus`. A scenario draws one row from
/// each group.
struct GroupConstraint {
    plus: Arc<Table>,
    minus: Arc<Table>,
    inv_kappa: f64,
}

impl GroupConstraint {
    fn plus_term(&self, x: &[f64], idx: usize, weight: f64, grad: &mut [f64]) -> f64 {
        let a = self.plus.row(idx);
        let z = linalg::dot(a, x) + 0.5;
        if z > 0.0 {
            linalg::axpy(weight, a, grad);
            z
        } else {
            0.0
        }
    }

    fn minus_term(&self, x: &[f64], idx: usize, weight: f64, grad: &mut [f64]) -> f64 {
        let a = self.minus.row(idx);
        let z = -linalg::dot(a, x) + 0.5;
        if z > 0.0 {
            linalg::axpy(-weight * self.inv_kappa, a, grad);
            self.inv_kappa * z
        } else {
            0.0
        }
    }
}

impl Component for GroupConstraint {
    fn sample(&self, x: &[f64], rng: &mut ChaCha8Rng, weight: f64, grad: &mut [f64]) -> f64 {
        let ip = rng::index_below(rng, self.plus.count);
        let im = rng::index_below(rng, self.minus.count);
        self.plus_term(x, ip, weight, grad) + self.minus_term(x, im, weight, grad)
    }

    fn exact(&self, x: &[f64], weight: f64, grad: &mut [f64]) -> Option<f64> {
        let mut acc_p = MeanSum::new(self.plus.count > KAHAN_THRESHOLD);
        let wp = weight / self.plus.count as f64;
        for idx in 0..self.plus.count {
            acc_p.add(self.plus_term(x, idx, wp, grad));
        }
        let mut acc_m = MeanSum::new(self.minus.count > KAHAN_THRESHOLD);
        let wm = weight / self.minus.count as f64;
        for idx in 0..self.minus.count {
            acc_m.add(self.minus_term(x, idx, wm, grad));
        }
        Some(acc_p.value() / self.plus.count as f64 + acc_m.value() / self.minus.count as f64)
    }

    fn has_exact(&self) -> bool {
        true
    }
}

/// Specification of a fairness-constrained instance.
#[derive(Debug, Clone)]
pub struct FairnessSpec {
    /// Labeled rows (features, label ∈ {−1, +1}) for the hinge objective.
    pub labeled: Vec<(Vec<f64>, f64)>,
    /// Unlabeled feature rows of the two groups.
    pub group_m: Vec<Vec<f64>>,
    pub group_f: Vec<Vec<f64>>,
    /// Disparity budget κ ∈ (0, 1].
    pub kappa: f64,
    /// Classifier ball radius λ.
    pub radius: f64,
}

impl FairnessSpec {
    /// Synthetic instance: Gaussian features, labels from a fixed hyperplane,
    /// group features shifted apart along the first coordinate.
    pub fn synthetic(
        n_labeled: usize,
        n_group: usize,
        dim: usize,
        kappa: f64,
        radius: f64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(rng::mix(seed, rng::salt::BUILD));
        let normal = |rng: &mut ChaCha8Rng| {
            let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            let u2: f64 = rng.random();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        let mut labeled = Vec::with_capacity(n_labeled);
        for _ in 0..n_labeled {
            let row: Vec<f64> = (0..dim).map(|_| normal(&mut rng)).collect();
            let label = if row.iter().sum::<f64>() >= 0.0 { 1.0 } else { -1.0 };
            labeled.push((row, label));
        }
        let group = |shift: f64, rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            (0..n_group)
                .map(|_| {
                    (0..dim)
                        .map(|j| normal(rng) + if j == 0 { shift } else { 0.0 })
                        .collect()
                })
                .collect()
        };
        let group_m = group(0.5, &mut rng);
        let group_f = group(-0.5, &mut rng);
        Self { labeled, group_m, group_f, kappa, radius }
    }
}

/// Build the SOEC: hinge objective over the labeled data, the two symmetric
/// group constraints with threshold 1/κ, domain = ball of radius λ.
pub fn build_fairness(spec: &FairnessSpec) -> Result<SoecProblem> {
    if !(spec.kappa > 0.0 && spec.kappa <= 1.0) {
        return Err(SlevelError::InvalidArgument(format!(
            "kappa must lie in (0, 1], got {}",
            spec.kappa
        )));
    }
    if !(spec.radius > 0.0 && spec.radius.is_finite()) {
        return Err(SlevelError::InvalidArgument(format!(
            "classifier ball radius must be positive, got {}",
            spec.radius
        )));
    }
    let dim = spec
        .labeled
        .first()
        .map(|(row, _)| row.len())
        .ok_or_else(|| SlevelError::InvalidArgument("labeled dataset is empty".into()))?;
    if dim == 0 {
        return Err(SlevelError::InvalidArgument("labeled rows must be nonempty".into()));
    }
    for (row, label) in &spec.labeled {
        if row.len() != dim || !linalg::all_finite(row) {
            return Err(SlevelError::InvalidArgument(
                "labeled rows must share one finite feature dimension".into(),
            ));
        }
        if *label != 1.0 && *label != -1.0 {
            return Err(SlevelError::InvalidArgument(format!(
                "labels must be ±1, got {label}"
            )));
        }
    }

    let labeled = Arc::new(
        spec.labeled
            .iter()
            .map(|(row, label)| (row.clone(), *label))
            .collect::<Vec<_>>(),
    );
    let objective = {
        let labeled = Arc::clone(&labeled);
        FiniteSum::new(labeled.len(), move |x: &[f64], idx: usize, w: f64, g: &mut [f64]| {
            let (a, b) = &labeled[idx];
            let margin = 1.0 - b * linalg::dot(a, x);
            if margin > 0.0 {
                linalg::axpy(-w * b, a, g);
                margin
            } else {
                0.0
            }
        })?
    };

    let table_m = Arc::new(Table::from_rows(&spec.group_m, dim, "group M")?);
    let table_f = Arc::new(Table::from_rows(&spec.group_f, dim, "group F")?);
    let inv_kappa = 1.0 / spec.kappa;
    let c1 = GroupConstraint {
        plus: Arc::clone(&table_m),
        minus: Arc::clone(&table_f),
        inv_kappa,
    };
    let c2 = GroupConstraint { plus: table_f, minus: table_m, inv_kappa };

    let total = spec.labeled.len() + spec.group_m.len() + spec.group_f.len();
    Ok(SoecProblem::new(
        "fairness",
        DomainSpec::centered_ball(dim, spec.radius)?,
        vec![Box::new(objective), Box::new(c1), Box::new(c2)],
        vec![inv_kappa, inv_kappa],
    )?
    .with_initial_point(vec![0.0; dim])
    .with_dataset_size(total as f64))
}

//! Desk-scale analytic problems with grid-computable level-set values,
//! used for ground-truth tests and the verification suite.

use crate::domain::DomainSpec;
use crate::error::Result;
use crate::problem::{ClosedForm, SoecProblem};

/// Which analytic instance to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyVariant {
    /// Minimize x on [0, 2] subject to 1 − x ≤ 0. Optimal value f* = 1;
    /// H(2) = −0.5, H(1) = 0, H(0.5) = 0.25; condition measure β = 1/2 at
    /// r⁰ = 2.
    OneD,
    /// Minimize ½‖x‖² on the radius-2 ball subject to 1 − x₁ − x₂ ≤ 0.
    /// Optimal value f* = 1/4 at (1/2, 1/2); H(2) = −1 at (1, 1),
    /// H(1) = 3 − 2√3; condition measure β = 4/7 at r⁰ = 2.
    TwoD,
}

/// Build an analytic toy with optional zero-mean uniform observation noise of
/// the given amplitude on every sampled component value. With amplitude 0 the
/// samplers return exactly the closed-form values.
pub fn build_toy(variant: ToyVariant, noise_amplitude: f64) -> Result<SoecProblem> {
    match variant {
        ToyVariant::OneD => {
            let f0 = ClosedForm::new(
                |x: &[f64], w: f64, g: &mut [f64]| {
                    g[0] += w;
                    x[0]
                },
                noise_amplitude,
            )?;
            let f1 = ClosedForm::new(
                |x: &[f64], w: f64, g: &mut [f64]| {
                    g[0] -= w;
                    1.0 - x[0]
                },
                noise_amplitude,
            )?;
            Ok(SoecProblem::new(
                "toy-1d",
                DomainSpec::interval(0.0, 2.0)?,
                vec![Box::new(f0), Box::new(f1)],
                vec![0.0],
            )?
            .with_initial_point(vec![2.0]))
        }
        ToyVariant::TwoD => {
            let f0 = ClosedForm::new(
                |x: &[f64], w: f64, g: &mut [f64]| {
                    g[0] += w * x[0];
                    g[1] += w * x[1];
                    0.5 * (x[0] * x[0] + x[1] * x[1])
                },
                noise_amplitude,
            )?;
            let f1 = ClosedForm::new(
                |x: &[f64], w: f64, g: &mut [f64]| {
                    g[0] -= w;
                    g[1] -= w;
                    1.0 - x[0] - x[1]
                },
                noise_amplitude,
            )?;
            Ok(SoecProblem::new(
                "toy-2d",
                DomainSpec::centered_ball(2, 2.0)?,
                vec![Box::new(f0), Box::new(f1)],
                vec![0.0],
            )?
            .with_initial_point(vec![1.0, 1.0]))
        }
    }
}

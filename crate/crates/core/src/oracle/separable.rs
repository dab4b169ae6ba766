//! Separable polynomial landscape: f(x) = sum_j [ a/2 x_j^2 + b/6 x_j^3 ].
//!
//! The Hessian is diag(a + b x_j), so the Hessian-Lipschitz constant is |b|
//! exactly. That makes this family the canonical fixture for checking
//! finite-difference error bounds with a known rho, and (with a < 0) for
//! negative-curvature descent steps.

use super::{BlackBoxProblem, Objective, SmoothnessProfile};
use crate::error::{require_positive, Result};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

pub struct SeparableCubic {
    d: usize,
    a: f64,
    b: f64,
}

impl Objective for SeparableCubic {
    fn dim(&self) -> usize {
        self.d
    }

    fn n_components(&self) -> usize {
        1
    }

    fn component(&self, _i: usize, x: &DVector<f64>) -> f64 {
        x.iter().map(|&t| 0.5 * self.a * t * t + self.b / 6.0 * t * t * t).sum()
    }

    fn analytic_gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        Some(DVector::from_fn(self.d, |j, _| self.a * x[j] + 0.5 * self.b * x[j] * x[j]))
    }

    fn analytic_hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_diagonal(&DVector::from_fn(self.d, |j, _| {
            self.a + self.b * x[j]
        })))
    }

    fn name(&self) -> &'static str {
        "separable-cubic"
    }
}

/// f(x) = sum_j [ a/2 x_j^2 + b/6 x_j^3 ] with rho = |b| exact. The gradient
/// Lipschitz constant is unbounded globally, so the caller declares the `ell`
/// valid on its working region.
pub fn make_separable_cubic(d: usize, a: f64, b: f64, ell: f64) -> Result<BlackBoxProblem> {
    require_positive("ell", ell)?;
    let profile = SmoothnessProfile::new(ell, b.abs(), 0.0)?;
    BlackBoxProblem::new(Arc::new(SeparableCubic { d, a, b }), profile)
}

/// f(x) = sum_j x_j^3 with rho = 6 exactly; ell = 6 is valid on the unit
/// ball. Used by the estimator error-bound sweeps.
pub fn make_cube_sum(d: usize) -> Result<BlackBoxProblem> {
    make_separable_cubic(d, 0.0, 6.0, 6.0)
}

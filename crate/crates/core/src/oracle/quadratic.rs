use super::{BlackBoxProblem, Objective, SmoothnessProfile};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// f(x) = 1/2 x^T H x + b^T x as a single-component black box.
///
/// Quadratics have rho = 0, so finite-difference estimators are exact on them
/// up to rounding; they anchor the exactness tests and the NCF eigen-oracle
/// experiments.
pub struct Quadratic {
    h: DMatrix<f64>,
    b: DVector<f64>,
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.h.nrows()
    }

    fn n_components(&self) -> usize {
        1
    }

    fn component(&self, _i: usize, x: &DVector<f64>) -> f64 {
        0.5 * (&self.h * x).dot(x) + self.b.dot(x)
    }

    fn analytic_gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        Some(&self.h * x + &self.b)
    }

    fn analytic_hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.h.clone())
    }

    fn name(&self) -> &'static str {
        "quadratic"
    }
}

/// Builds the metered problem. `ell` defaults to the max absolute eigenvalue
/// bound via the Frobenius norm when not supplied by the caller.
pub fn make_quadratic(h: DMatrix<f64>, b: DVector<f64>, ell: Option<f64>) -> Result<BlackBoxProblem> {
    if h.nrows() != h.ncols() {
        return Err(Error::param("h", "Hessian must be square"));
    }
    if h.nrows() != b.len() {
        return Err(Error::DimensionMismatch { expected: h.nrows(), got: b.len() });
    }
    let asym = (&h - h.transpose()).norm();
    if asym > 1e-12 * (1.0 + h.norm()) {
        return Err(Error::param("h", "Hessian must be symmetric"));
    }
    let ell = ell.unwrap_or_else(|| h.norm().max(f64::MIN_POSITIVE));
    let profile = SmoothnessProfile::new(ell, 0.0, 0.0)?;
    BlackBoxProblem::new(Arc::new(Quadratic { h, b }), profile)
}

/// Diagonal quadratic with the leading entry set to `lambda_min` and the rest
/// to `lambda_rest`; the standard NCF test instance.
pub fn diag_quadratic(d: usize, lambda_min: f64, lambda_rest: f64) -> BlackBoxProblem {
    let mut diag = DVector::from_element(d, lambda_rest);
    diag[0] = lambda_min;
    let h = DMatrix::from_diagonal(&diag);
    let ell = lambda_min.abs().max(lambda_rest.abs());
    make_quadratic(h, DVector::zeros(d), Some(ell)).expect("valid diagonal quadratic")
}

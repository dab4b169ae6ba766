//! The delta/rho negative-curvature jump: given a certified unit direction
//! v with curvature at most -delta/2, move delta/rho along v with a fair
//! random sign. The expected decrease is at least delta^3/(12 rho^2); the
//! greedy variant trades two metered full evaluations for the better sign.

use crate::error::{require_positive, Error, Result};
use crate::oracle::{BlackBoxProblem, Phase};
use nalgebra::DVector;
use rand::Rng;

fn check_nc_inputs(
    problem: &BlackBoxProblem,
    x: &DVector<f64>,
    v: &DVector<f64>,
    delta: f64,
    rho: f64,
) -> Result<()> {
    require_positive("delta", delta)?;
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::param("rho", "must be positive: the step length is delta/rho"));
    }
    if x.len() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), got: x.len() });
    }
    if v.len() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), got: v.len() });
    }
    if (v.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::param("v", "must be a unit vector"));
    }
    Ok(())
}

/// x +/- (delta/rho) v with a fair random sign. Query-free.
pub fn negative_curvature_step<R: Rng + ?Sized>(
    problem: &BlackBoxProblem,
    x: &DVector<f64>,
    v: &DVector<f64>,
    delta: f64,
    rho: f64,
    rng: &mut R,
) -> Result<DVector<f64>> {
    check_nc_inputs(problem, x, v, delta, rho)?;
    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    Ok(x + v * (sign * delta / rho))
}

/// Evaluates both candidate points (two metered full-sum evaluations) and
/// returns the one with the smaller value; ties take the positive sign.
pub fn negative_curvature_step_greedy(
    problem: &BlackBoxProblem,
    x: &DVector<f64>,
    v: &DVector<f64>,
    delta: f64,
    rho: f64,
) -> Result<DVector<f64>> {
    check_nc_inputs(problem, x, v, delta, rho)?;
    let step = v * (delta / rho);
    let plus = x + &step;
    let minus = x - &step;
    let f_plus = problem.eval_full(&plus, Phase::Other);
    let f_minus = problem.eval_full(&minus, Phase::Other);
    Ok(if f_plus <= f_minus { plus } else { minus })
}

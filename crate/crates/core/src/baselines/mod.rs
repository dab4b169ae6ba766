//! Comparison algorithms for the benchmark suite: ZPSGD (Gaussian-smoothed
//! perturbed gradient descent), PAGD with its EscapeSaddle subroutine, and
//! RSPI (random search alternating with derivative-free power iteration).
//!
//! All three run against the same metered [`crate::oracle::BlackBoxProblem`]
//! and report through [`crate::solvers::SolverReport`], so query counts and
//! trajectories are directly comparable with the NCF solvers. Direct
//! objective evaluations (triplet moves, escape-gain checks) land on the
//! ledger under `Phase::Other`; printed per-step costs hold for
//! single-component objectives and scale by n otherwise.

mod pagd;
mod rspi;
mod zpsgd;

pub use pagd::{pagd_run, PagdParams};
pub use rspi::{dfpi, rspi_run, RspiParams};
pub use zpsgd::{zpsgd_gradient, zpsgd_run, zpsgd_step, ZpsgdParams};

use nalgebra::DVector;
use rand::Rng;

use crate::estimators::sample_unit_sphere;

/// Uniform draw from the closed ball of the given radius.
pub(crate) fn sample_uniform_ball<R: Rng + ?Sized>(
    d: usize,
    radius: f64,
    rng: &mut R,
) -> DVector<f64> {
    let direction = sample_unit_sphere(d, rng);
    let u: f64 = rng.gen_range(0.0..1.0f64);
    radius * u.powf(1.0 / d as f64) * direction
}

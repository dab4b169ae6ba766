//! ZO-GD-NCF: full coordinate (or random-direction) gradient descent gated
//! by deterministic verification, with Chebyshev NCF escapes. Each iteration
//! verifies ||grad f|| at the current point; Large takes one descent step at
//! smoothing mu2, Small runs ZO-NCF-Deterministic and either certifies
//! (Bottom) or jumps delta/rho along the returned direction.

use super::report::{Event, Recorder, SolverReport, Termination};
use super::{
    full_batch, negative_curvature_step, negative_curvature_step_greedy, resolve_cap, verify_at,
    GradOption, SolverParams,
};
use crate::error::{Error, Result};
use crate::estimators::{coord_grad_central, rand_grad_central, Verdict, VerifyMode};
use crate::ncf::{ncf_deterministic, NcfOutcome, NcfParams};
use crate::oracle::{BlackBoxProblem, Phase};
use nalgebra::DVector;
use rand::Rng;

/// Resolved ZO-GD-NCF schedule.
#[derive(Debug, Clone)]
pub struct GdSchedule {
    pub eta: f64,
    pub k_max: usize,
    pub mu2: f64,
    /// Per-call NCF confidence p/K.
    pub p_ncf: f64,
    pub ncf: NcfParams,
}

/// Option I: eta = 1/(4l), mu2 = sqrt(3 eps / (4 rho sqrt(d))).
/// Option II: eta = 1/(8dl), mu2 = min(sqrt(3 eps / (4 rho d)),
/// eps/(16 sqrt(d) l)). Theory cap K = ceil(rho^2 Df/delta^3 + l Df/eps^2),
/// with the second term picking up a d factor under Option II.
pub fn resolve_gd(problem: &BlackBoxProblem, params: &SolverParams) -> Result<GdSchedule> {
    let d = problem.dim() as f64;
    let ell = problem.profile().ell;
    let rho = problem.profile().rho_derivation();
    let eps = params.epsilon;
    let delta = params.delta;
    let eta = params.eta.unwrap_or(match params.option {
        GradOption::I => 1.0 / (4.0 * ell),
        GradOption::II => 1.0 / (8.0 * d * ell),
    });
    let mu2 = params.mu2.unwrap_or(match params.option {
        GradOption::I => (3.0 * eps / (4.0 * rho * d.sqrt())).sqrt(),
        GradOption::II => {
            (3.0 * eps / (4.0 * rho * d)).sqrt().min(eps / (16.0 * d.sqrt() * ell))
        }
    });
    let option = params.option;
    let k_max = resolve_cap(params, problem, |df| {
        let grad_term = match option {
            GradOption::I => ell * df / (eps * eps),
            GradOption::II => d * ell * df / (eps * eps),
        };
        rho * rho * df / (delta * delta * delta) + grad_term
    })?;
    let p_ncf = super::clamp_p(params.p / k_max as f64);
    let ncf = params.make_ncf(p_ncf)?;
    Ok(GdSchedule { eta, k_max, mu2, p_ncf, ncf })
}

pub fn zo_gd_ncf<R: Rng + ?Sized>(
    problem: &BlackBoxProblem,
    x0: &DVector<f64>,
    params: &SolverParams,
    rng: &mut R,
) -> Result<SolverReport> {
    if x0.len() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), got: x0.len() });
    }
    let sched = resolve_gd(problem, params)?;
    let rho = problem.profile().rho_derivation();
    let batch = full_batch(problem.n_components());
    let mut rec = Recorder::new(problem);
    let mut x = x0.clone();

    for _t in 0..sched.k_max {
        if rec.spent(problem) >= params.query_budget {
            return Ok(rec.finish(problem, x, Termination::QueryBudgetExhausted));
        }
        let verify = verify_at(
            problem,
            &x,
            params.epsilon,
            params.p,
            VerifyMode::Deterministic,
            params.mu1,
            rng,
        )?;
        rec.record(
            problem,
            &x,
            Event::Verify {
                verdict: verify.verdict,
                observed_norm: verify.observed_norm,
                batch: verify.estimate.batch.len(),
            },
        );
        match verify.verdict {
            Verdict::Large => {
                let est = match params.option {
                    GradOption::I => {
                        coord_grad_central(problem, &batch, &x, sched.mu2, Phase::GradEst)?
                    }
                    GradOption::II => {
                        rand_grad_central(problem, &batch, &x, sched.mu2, Phase::GradEst, rng)?
                    }
                };
                let x_next = &x - &est.g * sched.eta;
                let step_norm = (&x_next - &x).norm();
                x = x_next;
                rec.record(problem, &x, Event::Descent { step_norm, batch: batch.len() });
            }
            Verdict::Small => match ncf_deterministic(problem, &x, &sched.ncf, rng)? {
                NcfOutcome::Bottom => {
                    rec.record(problem, &x, Event::NcfCall { found_direction: false });
                    return Ok(rec.finish(problem, x, Termination::SospCertified));
                }
                NcfOutcome::Direction(v) => {
                    let x_next = if params.greedy_nc_sign {
                        negative_curvature_step_greedy(problem, &x, &v, params.delta, rho)?
                    } else {
                        negative_curvature_step(problem, &x, &v, params.delta, rho, rng)?
                    };
                    let sign = (&x_next - &x).dot(&v).signum();
                    x = x_next;
                    rec.record(problem, &x, Event::NcStep { sign });
                }
            },
        }
    }
    Ok(rec.finish(problem, x, Termination::IterationCapReached))
}

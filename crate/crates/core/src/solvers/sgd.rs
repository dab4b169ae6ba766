//! ZO-SGD-NCF: mini-batch gradient descent gated by online verification,
//! with stochastic-power (online) NCF escapes. Each iteration verifies at
//! confidence p/K (giving the ceil((32 sigma^2/eps^2) ln(2K/p)) verification
//! batch), then either descends on a fresh batch S at smoothing mu2 or runs
//! ZO-NCF-Online at confidence p/(2K).

use super::report::{Event, Recorder, SolverReport, Termination};
use super::{
    negative_curvature_step, negative_curvature_step_greedy, resolve_cap,
    sample_without_replacement, verify_at, GradOption, SolverParams,
};
use crate::error::{Error, Result};
use crate::estimators::{coord_grad_central, rand_grad_central, Verdict, VerifyMode};
use crate::ncf::{ncf_online, NcfOutcome, NcfParams};
use crate::oracle::{BlackBoxProblem, Phase};
use nalgebra::DVector;
use rand::Rng;

/// Resolved ZO-SGD-NCF schedule.
#[derive(Debug, Clone)]
pub struct SgdSchedule {
    pub eta: f64,
    pub k_max: usize,
    pub mu2: f64,
    /// Descent batch |S|, already capped at n.
    pub s_batch: usize,
    /// Per-iteration verification confidence p/K.
    pub p_verify: f64,
    /// Per-call NCF confidence p/(2K).
    pub p_ncf: f64,
    pub ncf: NcfParams,
}

/// Option I: |S| = max(32 sigma^2/eps^2, 1), eta = 1/(4l),
/// mu2 = sqrt(3 eps/(4 rho sqrt(d))). Option II: |S| = max(8 sigma^2/eps^2,
/// 1), eta = 1/(32dl), mu2 = min(sqrt(3 eps/(4 rho d)), eps/(32 sqrt(d) l)).
/// Theory cap K as for ZO-GD-NCF.
pub fn resolve_sgd(problem: &BlackBoxProblem, params: &SolverParams) -> Result<SgdSchedule> {
    let d = problem.dim() as f64;
    let n = problem.n_components();
    let ell = problem.profile().ell;
    let rho = problem.profile().rho_derivation();
    let sigma = problem.profile().sigma;
    let eps = params.epsilon;
    let delta = params.delta;
    let eta = params.eta.unwrap_or(match params.option {
        GradOption::I => 1.0 / (4.0 * ell),
        GradOption::II => 1.0 / (32.0 * d * ell),
    });
    let mu2 = params.mu2.unwrap_or(match params.option {
        GradOption::I => (3.0 * eps / (4.0 * rho * d.sqrt())).sqrt(),
        GradOption::II => {
            (3.0 * eps / (4.0 * rho * d)).sqrt().min(eps / (32.0 * d.sqrt() * ell))
        }
    });
    let s_raw = params.s_batch.unwrap_or_else(|| {
        let scale = match params.option {
            GradOption::I => 32.0,
            GradOption::II => 8.0,
        };
        (scale * sigma * sigma / (eps * eps)).max(1.0).ceil() as usize
    });
    let s_batch = s_raw.min(n).max(1);
    let option = params.option;
    let k_max = resolve_cap(params, problem, |df| {
        let grad_term = match option {
            GradOption::I => ell * df / (eps * eps),
            GradOption::II => d * ell * df / (eps * eps),
        };
        rho * rho * df / (delta * delta * delta) + grad_term
    })?;
    let p_verify = super::clamp_p(params.p / k_max as f64);
    let p_ncf = super::clamp_p(params.p / (2.0 * k_max as f64));
    let ncf = params.make_ncf(p_ncf)?;
    Ok(SgdSchedule { eta, k_max, mu2, s_batch, p_verify, p_ncf, ncf })
}

pub fn zo_sgd_ncf<R: Rng + ?Sized>(
    problem: &BlackBoxProblem,
    x0: &DVector<f64>,
    params: &SolverParams,
    rng: &mut R,
) -> Result<SolverReport> {
    if x0.len() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), got: x0.len() });
    }
    let sched = resolve_sgd(problem, params)?;
    let rho = problem.profile().rho_derivation();
    let n = problem.n_components();
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
            sched.p_verify,
            VerifyMode::Online,
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
                let batch = sample_without_replacement(n, sched.s_batch, rng);
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
            Verdict::Small => match ncf_online(problem, &x, &sched.ncf, rng)? {
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

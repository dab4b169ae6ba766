//! ZO-SCSG: variance-reduced epochs anchored at a large-batch coordinate
//! gradient. One epoch samples an anchor batch of size B, draws a geometric
//! epoch length N with E[N] = B/b (Option I; dB/b under Option II), and runs
//! N corrected inner steps on fresh batches of size b. ZO-SCSG-NCF wraps
//! epochs in the verify/NCF loop, delegating to ZO-SGD-NCF at confidence 2/3
//! when b > B.

use super::report::{Event, Recorder, SolverReport, Termination};
use super::{
    negative_curvature_step, negative_curvature_step_greedy, resolve_cap,
    sample_without_replacement, verify_at, GradOption, SolverParams,
};
use crate::error::{require_probability, Error, Result};
use crate::estimators::{
    coord_grad_central, rand_grad_central_with_direction, sample_unit_sphere, Verdict, VerifyMode,
};
use crate::ncf::{ncf_online, NcfOutcome, NcfParams};
use crate::oracle::{BlackBoxProblem, Phase};
use nalgebra::DVector;
use rand::Rng;

/// Resolved ZO-SCSG schedule.
#[derive(Debug, Clone)]
pub struct ScsgSchedule {
    pub eta: f64,
    pub k_max: usize,
    pub mu2: f64,
    /// Anchor batch B, capped at n.
    pub big_b: usize,
    /// Inner batch b.
    pub small_b: usize,
    /// Geometric continue-probability theta; E[N] = theta/(1 - theta).
    pub theta: f64,
    pub p_verify: f64,
    pub p_ncf: f64,
    pub ncf: NcfParams,
}

/// What one epoch did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochStats {
    /// Realized geometric draw N.
    pub inner_steps: usize,
    pub anchor_batch: usize,
    pub inner_batch: usize,
    /// Metered queries: 2 d B for the anchor plus 4 d b (Option I) or 4 b
    /// (Option II) per inner step.
    pub queries: u64,
}

/// Geometric epoch length on {0, 1, ...} with continue-probability theta:
/// P(N >= k) = theta^k, so E[N] = theta/(1 - theta).
pub fn sample_epoch_length<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> Result<usize> {
    require_probability("theta", theta)?;
    let u = loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            break u;
        }
    };
    Ok((u.ln() / theta.ln()).floor() as usize)
}

/// B and b before the b <= B gate, so the delegation check can run first.
pub(crate) fn resolve_scsg_batches(
    problem: &BlackBoxProblem,
    params: &SolverParams,
) -> (usize, usize) {
    let n = problem.n_components();
    let sigma = problem.profile().sigma;
    let eps = params.epsilon;
    let big_raw = params.big_b.unwrap_or_else(|| {
        let scale = match params.option {
            GradOption::I => 480.0,
            GradOption::II => 1152.0,
        };
        (scale * sigma * sigma / (eps * eps)).max(1.0).ceil() as usize
    });
    let big_b = big_raw.min(n).max(1);
    let small_b = params.small_b.unwrap_or_else(|| {
        let delta = params.delta;
        let ell = problem.profile().ell;
        let rho = problem.profile().rho_derivation();
        let base = (eps * eps + sigma * sigma) * eps.powi(4) * rho.powi(6)
            / (delta.powi(9) * ell.powi(3));
        let scaled = match params.option {
            GradOption::I => base,
            GradOption::II => base * problem.dim() as f64,
        };
        scaled.max(1.0).ceil() as usize
    });
    (big_b, small_b)
}

/// Option I: eta = (b/B)^(2/3)/(4l), mu2 = eps/(4 sqrt(cd) l), theta =
/// B/(B+b). Option II: eta = ((b/d)/B)^(2/3)/(8l), mu2 = eps/(4 sqrt(c) d l),
/// theta = B/(B + b/d). Theory cap K = ceil(l b^(1/3) Df/(eps^2 B^(1/3)))
/// (with b/d replacing b under Option II). Errors when b > B; the solver
/// delegates before resolving.
pub fn resolve_scsg(problem: &BlackBoxProblem, params: &SolverParams) -> Result<ScsgSchedule> {
    let (big_b, small_b) = resolve_scsg_batches(problem, params);
    if small_b > big_b {
        return Err(Error::param("small_b", "inner batch b must not exceed anchor batch B"));
    }
    let d = problem.dim() as f64;
    let ell = problem.profile().ell;
    let eps = params.epsilon;
    let c = params.scsg_c;
    let ratio = match params.option {
        GradOption::I => small_b as f64 / big_b as f64,
        GradOption::II => (small_b as f64 / d) / big_b as f64,
    };
    let eta = params.eta.unwrap_or(match params.option {
        GradOption::I => ratio.powf(2.0 / 3.0) / (4.0 * ell),
        GradOption::II => ratio.powf(2.0 / 3.0) / (8.0 * ell),
    });
    let mu2 = params.mu2.unwrap_or(match params.option {
        GradOption::I => eps / (4.0 * (c * d).sqrt() * ell),
        GradOption::II => eps / (4.0 * c.sqrt() * d * ell),
    });
    let theta = match params.option {
        GradOption::I => big_b as f64 / (big_b as f64 + small_b as f64),
        GradOption::II => big_b as f64 / (big_b as f64 + small_b as f64 / d),
    };
    let k_max = resolve_cap(params, problem, |df| {
        ell * ratio.cbrt() * df / (eps * eps)
    })?;
    let p_verify = super::clamp_p(2.0 / k_max as f64);
    let p_ncf = super::clamp_p(1.0 / (20.0 * k_max as f64));
    let ncf = params.make_ncf(p_ncf)?;
    Ok(ScsgSchedule { eta, k_max, mu2, big_b, small_b, theta, p_verify, p_ncf, ncf })
}

fn run_epoch<R: Rng + ?Sized>(
    problem: &BlackBoxProblem,
    anchor: &DVector<f64>,
    sched: &ScsgSchedule,
    option: GradOption,
    rng: &mut R,
) -> Result<(DVector<f64>, EpochStats)> {
    let n = problem.n_components();
    let d = problem.dim();
    let before = problem.ledger().total();
    let anchor_batch = sample_without_replacement(n, sched.big_b, rng);
    let v_anchor =
        coord_grad_central(problem, &anchor_batch, anchor, sched.mu2, Phase::GradEst)?.g;
    let inner_steps = sample_epoch_length(sched.theta, rng)?;
    let mut x = anchor.clone();
    for _k in 1..=inner_steps {
        let batch = sample_without_replacement(n, sched.small_b, rng);
        let v = match option {
            GradOption::I => {
                let g_here = coord_grad_central(problem, &batch, &x, sched.mu2, Phase::GradEst)?;
                let g_anchor =
                    coord_grad_central(problem, &batch, anchor, sched.mu2, Phase::GradEst)?;
                g_here.g - g_anchor.g + &v_anchor
            }
            GradOption::II => {
                // One shared direction per step keeps the correction
                // variance-reduced.
                let u = sample_unit_sphere(d, rng);
                let g_here = rand_grad_central_with_direction(
                    problem,
                    &batch,
                    &x,
                    sched.mu2,
                    &u,
                    Phase::GradEst,
                )?;
                let g_anchor = rand_grad_central_with_direction(
                    problem,
                    &batch,
                    anchor,
                    sched.mu2,
                    &u,
                    Phase::GradEst,
                )?;
                g_here.g - g_anchor.g + &v_anchor
            }
        };
        x -= v * sched.eta;
    }
    let stats = EpochStats {
        inner_steps,
        anchor_batch: anchor_batch.len(),
        inner_batch: sched.small_b,
        queries: problem.ledger().total() - before,
    };
    Ok((x, stats))
}

/// One SCSG epoch from `x_anchor`: anchor gradient on a batch of size B,
/// geometric draw N, then N corrected inner steps. Standalone callable;
/// rejects b > B.
pub fn zo_scsg_epoch<R: Rng + ?Sized>(
    problem: &BlackBoxProblem,
    x_anchor: &DVector<f64>,
    params: &SolverParams,
    rng: &mut R,
) -> Result<(DVector<f64>, EpochStats)> {
    if x_anchor.len() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), got: x_anchor.len() });
    }
    let sched = resolve_scsg(problem, params)?;
    run_epoch(problem, x_anchor, &sched, params.option, rng)
}

pub fn zo_scsg_ncf<R: Rng + ?Sized>(
    problem: &BlackBoxProblem,
    x0: &DVector<f64>,
    params: &SolverParams,
    rng: &mut R,
) -> Result<SolverReport> {
    if x0.len() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), got: x0.len() });
    }
    let (big_b, small_b) = resolve_scsg_batches(problem, params);
    if small_b > big_b {
        // Printed fallback: hand the run to ZO-SGD-NCF at confidence 2/3.
        let mut delegated = params.clone();
        delegated.p = 1.0 / 3.0;
        return zo_sgd_ncf_delegate(problem, x0, &delegated, rng);
    }
    let sched = resolve_scsg(problem, params)?;
    let rho = problem.profile().rho_derivation();
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
                let (x_next, stats) = run_epoch(problem, &x, &sched, params.option, rng)?;
                x = x_next;
                rec.record(
                    problem,
                    &x,
                    Event::ScsgEpoch {
                        anchor_batch: stats.anchor_batch,
                        inner_steps: stats.inner_steps,
                        inner_batch: stats.inner_batch,
                    },
                );
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

fn zo_sgd_ncf_delegate<R: Rng + ?Sized>(
    problem: &BlackBoxProblem,
    x0: &DVector<f64>,
    params: &SolverParams,
    rng: &mut R,
) -> Result<SolverReport> {
    super::zo_sgd_ncf(problem, x0, params, rng)
}

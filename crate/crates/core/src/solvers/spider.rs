//! ZO-SPIDER: path-tracking gradient estimates refreshed from a large batch
//! every q steps and corrected in between by coordinate-difference pairs on a
//! small with-replacement batch, driving normalized steps of fixed length
//! eta. [`zo_spider_coord`] is the standalone first-order loop that exits
//! once the estimate norm is small. [`zo_spider_ncf`] wraps mini-epochs of
//! length K in an outer NCF loop: a found direction is applied as K equal
//! mini-steps (total displacement delta/rho) while the estimate chain keeps
//! tracking, and the small-estimate exit after a Bottom call certifies the
//! returned point.

use super::report::{Event, Recorder, SolverReport, Termination};
use super::{
    clamp_p, practical_cap, sample_with_replacement, sample_without_replacement, SolverParams,
    SolverPreset,
};
use crate::error::{Error, Result};
use crate::estimators::{coord_grad_central, Verdict};
use crate::ncf::{ncf_online, NcfOutcome, NcfParams};
use crate::oracle::{BlackBoxProblem, Phase};
use nalgebra::DVector;
use rand::Rng;

/// Resolved schedule shared by both SPIDER solvers.
#[derive(Debug, Clone)]
pub struct SpiderSchedule {
    /// Step length; also the negative-curvature mini-step length.
    pub eta: f64,
    /// Refresh period on the global step counter.
    pub q: usize,
    /// Refresh batch size, capped at n.
    pub s1: usize,
    /// Correction batch size (with replacement).
    pub s2: usize,
    /// Smoothing for every coordinate estimate in the loop.
    pub mu: f64,
    /// Exit scale: the loop exits at ||v|| <= 2 eps_tilde and guarantees
    /// the true gradient is below 3 eps_tilde there.
    pub eps_tilde: f64,
    pub n0: f64,
    /// Total step cap: the iteration cap itself for the coord variant,
    /// j_max * mini_epoch for the NCF variant.
    pub k_max: usize,
    /// Outer NCF rounds (1 for the coord variant).
    pub j_max: usize,
    /// Steps per outer round (equals k_max for the coord variant).
    pub mini_epoch: usize,
    /// NCF schedule at confidence 1/(16 j_max); `None` for the coord variant.
    pub ncf: Option<NcfParams>,
}

struct SpiderBase {
    n0: f64,
    eta: f64,
    q: usize,
    s1: usize,
    s2: usize,
}

/// n0 defaults to 1; eta = eps/(l n0); q = round(sigma n0/eps) under theory
/// (32 under practical); |S1| = 16 sigma^2/eps^2 capped at n; |S2| = round(16
/// sigma/(eps n0)), which errors when it rounds to zero (deterministic
/// objectives must set s2 explicitly).
fn resolve_base(problem: &BlackBoxProblem, params: &SolverParams) -> Result<SpiderBase> {
    let sigma = problem.profile().sigma;
    let ell = problem.profile().ell;
    let eps = params.epsilon;
    let n = problem.n_components();
    let n0 = params.n0.unwrap_or(1.0);
    let eta = params.eta.unwrap_or(eps / (ell * n0));
    let q = params.q.unwrap_or(match params.preset {
        SolverPreset::Theory => ((sigma * n0 / eps).round() as usize).max(1),
        SolverPreset::Practical => 32,
    });
    let s1 = params
        .s1
        .unwrap_or_else(|| ((16.0 * sigma * sigma / (eps * eps)).ceil() as usize).max(1))
        .min(n);
    let s2 = match params.s2 {
        Some(s) => s,
        None => {
            let raw = (16.0 * sigma / (eps * n0)).round();
            if raw < 1.0 {
                return Err(Error::param(
                    "s2",
                    "16 sigma/(epsilon n0) rounds to zero; choose n0 smaller or set s2 explicitly",
                ));
            }
            raw as usize
        }
    };
    Ok(SpiderBase { n0, eta, q, s1, s2 })
}

fn spider_mu(params: &SolverParams, problem: &BlackBoxProblem, q: usize, eps_tilde: f64) -> f64 {
    params.mu2.unwrap_or_else(|| {
        let rho = problem.profile().rho_derivation();
        let d = problem.dim() as f64;
        (params.epsilon * eps_tilde / (8.0 * (q * q) as f64 * rho * rho * d)).powf(0.25)
    })
}

/// Standalone first-order schedule. Theory cap K0 = floor(4 l n0/eps^2) + 2
/// as printed (no delta_f enters); eps_tilde = 10 eps ln(4(K0+1)/p) under
/// theory, eps under practical.
pub fn resolve_spider_coord(
    problem: &BlackBoxProblem,
    params: &SolverParams,
) -> Result<SpiderSchedule> {
    let base = resolve_base(problem, params)?;
    let ell = problem.profile().ell;
    let eps = params.epsilon;
    let k_max = match params.k_max {
        Some(k) => k,
        None => match params.preset {
            SolverPreset::Practical => practical_cap(params.query_budget, problem.dim()),
            SolverPreset::Theory => (4.0 * ell * base.n0 / (eps * eps)).floor() as usize + 2,
        },
    };
    let factor = params.eps_tilde_factor.unwrap_or(match params.preset {
        SolverPreset::Practical => 1.0,
        SolverPreset::Theory => 10.0 * (4.0 * (k_max as f64 + 1.0) / params.p).ln(),
    });
    let eps_tilde = factor * eps;
    let mu = spider_mu(params, problem, base.q, eps_tilde);
    Ok(SpiderSchedule {
        eta: base.eta,
        q: base.q,
        s1: base.s1,
        s2: base.s2,
        mu,
        eps_tilde,
        n0: base.n0,
        k_max,
        j_max: 1,
        mini_epoch: k_max,
        ncf: None,
    })
}

/// NCF-wrapped schedule. The mini-epoch K = ceil((delta/rho)/eta) keeps the
/// total negative-curvature displacement at delta/rho under any eta; theory
/// J = 8(floor(max(12 rho^2 Df/delta^3, 4 rho Df/(delta eps))) + 1) needs
/// delta_f, practical J spreads the budget as budget/(2 d K); eps_tilde =
/// 10 eps ln(128(K0+1)) under theory with K0 = J K. The NCF confidence is
/// 1/(16 J).
pub fn resolve_spider_ncf(
    problem: &BlackBoxProblem,
    params: &SolverParams,
) -> Result<SpiderSchedule> {
    let base = resolve_base(problem, params)?;
    let rho = problem.profile().rho_derivation();
    let delta = params.delta;
    let eps = params.epsilon;
    let mini_epoch = params
        .mini_epoch
        .unwrap_or_else(|| (((delta / rho) / base.eta).ceil() as usize).max(1));
    let j_max = match params.k_max {
        Some(j) => j,
        None => match params.preset {
            SolverPreset::Practical => {
                let per_round = (2 * problem.dim() as u64) * mini_epoch as u64;
                ((params.query_budget / per_round.max(1)).max(1)).min(usize::MAX as u64) as usize
            }
            SolverPreset::Theory => {
                let df = problem.profile().delta_f.ok_or_else(|| {
                    Error::param(
                        "k_max",
                        "theory preset needs delta_f on the smoothness profile (or an explicit k_max)",
                    )
                })?;
                let inner = (12.0 * rho * rho * df / delta.powi(3))
                    .max(4.0 * rho * df / (delta * eps));
                8 * (inner.floor() as usize + 1)
            }
        },
    };
    let k0 = j_max.saturating_mul(mini_epoch);
    let factor = params.eps_tilde_factor.unwrap_or(match params.preset {
        SolverPreset::Practical => 1.0,
        SolverPreset::Theory => 10.0 * (128.0 * (k0 as f64 + 1.0)).ln(),
    });
    let eps_tilde = factor * eps;
    let mu = spider_mu(params, problem, base.q, eps_tilde);
    let ncf = Some(params.make_ncf(clamp_p(1.0 / (16.0 * j_max as f64)))?);
    Ok(SpiderSchedule {
        eta: base.eta,
        q: base.q,
        s1: base.s1,
        s2: base.s2,
        mu,
        eps_tilde,
        n0: base.n0,
        k_max: k0,
        j_max,
        mini_epoch,
        ncf,
    })
}

/// Estimate at the global counter `k`: refresh from |S1| without replacement
/// when k = 0 mod q (or there is no previous estimate), else correct the
/// previous estimate by a coordinate-difference pair on one with-replacement
/// batch evaluated at both the current and previous iterate.
fn next_estimate<R: Rng + ?Sized>(
    problem: &BlackBoxProblem,
    sched: &SpiderSchedule,
    x: &DVector<f64>,
    prev: &Option<(DVector<f64>, DVector<f64>)>,
    k: usize,
    rng: &mut R,
) -> Result<(DVector<f64>, bool, usize)> {
    let n = problem.n_components();
    if k % sched.q == 0 || prev.is_none() {
        let batch = sample_without_replacement(n, sched.s1, rng);
        let est = coord_grad_central(problem, &batch, x, sched.mu, Phase::GradEst)?;
        Ok((est.g, true, batch.len()))
    } else {
        let (x_prev, v_prev) = prev.as_ref().expect("checked above");
        let batch = sample_with_replacement(n, sched.s2, rng);
        let g_here = coord_grad_central(problem, &batch, x, sched.mu, Phase::GradEst)?;
        let g_prev = coord_grad_central(problem, &batch, x_prev, sched.mu, Phase::GradEst)?;
        Ok((g_here.g - g_prev.g + v_prev, false, batch.len()))
    }
}

/// Standalone ZO-SPIDER descent to a first-order point: exits with
/// [`Termination::GradConverged`] once ||v_k|| <= 2 eps_tilde, which implies
/// ||grad f|| <= 3 eps_tilde at the returned point with the schedule's
/// confidence. No second-order certificate.
pub fn zo_spider_coord<R: Rng + ?Sized>(
    problem: &BlackBoxProblem,
    x0: &DVector<f64>,
    params: &SolverParams,
    rng: &mut R,
) -> Result<SolverReport> {
    if x0.len() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), got: x0.len() });
    }
    let sched = resolve_spider_coord(problem, params)?;
    let mut rec = Recorder::new(problem);
    let mut x = x0.clone();
    let mut prev: Option<(DVector<f64>, DVector<f64>)> = None;
    for k in 0..sched.k_max {
        if rec.spent(problem) >= params.query_budget {
            return Ok(rec.finish(problem, x, Termination::QueryBudgetExhausted));
        }
        let (v, refreshed, batch) = next_estimate(problem, &sched, &x, &prev, k, rng)?;
        if params.record_iterates {
            rec.push_diag(&x, &v, refreshed);
        }
        let norm = v.norm();
        if norm <= 2.0 * sched.eps_tilde {
            // The estimate doubles as the exit test: no extra queries.
            rec.record(
                problem,
                &x,
                Event::Verify { verdict: Verdict::Small, observed_norm: norm, batch },
            );
            return Ok(rec.finish(problem, x, Termination::GradConverged));
        }
        let x_next = &x - &v * (sched.eta / norm);
        rec.record(
            problem,
            &x_next,
            Event::SpiderStep { refresh: refreshed, nc: false, batch, step_norm: sched.eta },
        );
        prev = Some((x, v));
        x = x_next;
    }
    Ok(rec.finish(problem, x, Termination::IterationCapReached))
}

/// ZO-SPIDER-NCF. Each outer round calls the online NCF at the current
/// iterate (recorded whatever the outcome), then runs one mini-epoch of
/// `mini_epoch` steps on the global counter: a found direction w1 is applied
/// as fixed mini-steps x - (+-eta w1) while the estimate chain keeps
/// tracking; after a Bottom outcome the round descends normally and the
/// small-estimate exit returns a certified point.
pub fn zo_spider_ncf<R: Rng + ?Sized>(
    problem: &BlackBoxProblem,
    x0: &DVector<f64>,
    params: &SolverParams,
    rng: &mut R,
) -> Result<SolverReport> {
    if x0.len() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), got: x0.len() });
    }
    let sched = resolve_spider_ncf(problem, params)?;
    let ncf = sched.ncf.as_ref().expect("ncf schedule always resolved");
    let mut rec = Recorder::new(problem);
    let mut x = x0.clone();
    let mut prev: Option<(DVector<f64>, DVector<f64>)> = None;
    let mut k_global: usize = 0;
    let mut termination = Termination::IterationCapReached;
    'outer: for _j in 0..sched.j_max {
        if rec.spent(problem) >= params.query_budget {
            termination = Termination::QueryBudgetExhausted;
            break;
        }
        let outcome = ncf_online(problem, &x, ncf, rng)?;
        let w2 = match &outcome {
            NcfOutcome::Direction(w1) => {
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                Some(w1 * (sign * sched.eta))
            }
            NcfOutcome::Bottom => None,
        };
        rec.record(problem, &x, Event::NcfCall { found_direction: w2.is_some() });
        for _step in 0..sched.mini_epoch {
            if rec.spent(problem) >= params.query_budget {
                termination = Termination::QueryBudgetExhausted;
                break 'outer;
            }
            let (v, refreshed, batch) = next_estimate(problem, &sched, &x, &prev, k_global, rng)?;
            if params.record_iterates {
                rec.push_diag(&x, &v, refreshed);
            }
            k_global += 1;
            match &w2 {
                Some(w2) => {
                    let x_next = &x - w2;
                    rec.record(
                        problem,
                        &x_next,
                        Event::SpiderStep {
                            refresh: refreshed,
                            nc: true,
                            batch,
                            step_norm: w2.norm(),
                        },
                    );
                    prev = Some((x, v));
                    x = x_next;
                }
                None => {
                    let norm = v.norm();
                    if norm <= 2.0 * sched.eps_tilde {
                        // Exit inside a Bottom round: the estimate is the
                        // gradient certificate, the NCF call the curvature
                        // certificate.
                        rec.record(
                            problem,
                            &x,
                            Event::Verify {
                                verdict: Verdict::Small,
                                observed_norm: norm,
                                batch,
                            },
                        );
                        return Ok(rec.finish(problem, x, Termination::SospCertified));
                    }
                    let x_next = &x - &v * (sched.eta / norm);
                    rec.record(
                        problem,
                        &x_next,
                        Event::SpiderStep {
                            refresh: refreshed,
                            nc: false,
                            batch,
                            step_norm: sched.eta,
                        },
                    );
                    prev = Some((x, v));
                    x = x_next;
                }
            }
        }
    }
    Ok(rec.finish(problem, x, termination))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{make_quadratic, sample_cubic_reg_stochastic};
    use crate::spectral;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn theory_schedules_reproduce_printed_formulas() {
        let d = 8;
        let raw = sample_cubic_reg_stochastic(d, 5, 1.0, 16).unwrap();
        let problem = raw.with_profile(raw.profile().with_delta_f(12.0));
        let sigma = problem.profile().sigma;
        let ell = problem.profile().ell;
        let rho = problem.profile().rho;
        let eps = 0.2;
        let delta = (rho * eps).sqrt();
        let p = 0.01;
        let params = SolverParams::theory(eps, delta, p).unwrap().with_n0(2.0).unwrap();

        let coord = resolve_spider_coord(&problem, &params).unwrap();
        assert_eq!(coord.eta, eps / (ell * 2.0));
        assert_eq!(coord.q, ((sigma * 2.0 / eps).round() as usize).max(1));
        let want_s1 = (((16.0 * sigma * sigma / (eps * eps)).ceil() as usize).max(1)).min(16);
        assert_eq!(coord.s1, want_s1);
        assert_eq!(coord.s2, (16.0 * sigma / (eps * 2.0)).round() as usize);
        let k0 = (4.0 * ell * 2.0 / (eps * eps)).floor() as usize + 2;
        assert_eq!(coord.k_max, k0);
        let want_tilde = 10.0 * eps * (4.0 * (k0 as f64 + 1.0) / p).ln();
        assert!((coord.eps_tilde - want_tilde).abs() < 1e-12);
        let want_mu = (eps * want_tilde
            / (8.0 * (coord.q * coord.q) as f64 * rho * rho * d as f64))
            .powf(0.25);
        assert!((coord.mu - want_mu).abs() < 1e-12);
        assert_eq!(coord.j_max, 1);
        assert!(coord.ncf.is_none());

        let ncf = resolve_spider_ncf(&problem, &params).unwrap();
        let want_epoch = ((delta / rho) / ncf.eta).ceil() as usize;
        assert_eq!(ncf.mini_epoch, want_epoch);
        let inner = (12.0 * rho * rho * 12.0 / delta.powi(3)).max(4.0 * rho * 12.0 / (delta * eps));
        let want_j = 8 * (inner.floor() as usize + 1);
        assert_eq!(ncf.j_max, want_j);
        assert_eq!(ncf.k_max, want_j * want_epoch);
        let want_tilde2 = 10.0 * eps * (128.0 * ((want_j * want_epoch) as f64 + 1.0)).ln();
        assert!((ncf.eps_tilde - want_tilde2).abs() < 1e-12);
        let want_p = 1.0 / (16.0 * want_j as f64);
        assert_eq!(ncf.ncf.as_ref().unwrap().p, want_p);

        // Theory J needs delta_f; a deterministic objective has no sigma so
        // s2 rounds to zero without an override.
        assert!(resolve_spider_ncf(&raw, &params).is_err());
        let quad =
            make_quadratic(DMatrix::identity(3, 3), DVector::zeros(3), Some(1.0)).unwrap();
        let err = resolve_spider_coord(&quad, &params).unwrap_err();
        assert!(err.to_string().contains("s2"));
    }

    #[test]
    fn normalized_steps_track_the_exact_gradient_on_a_quadratic() {
        // n = 1 makes every coordinate estimate the exact gradient, so the
        // correction chain reproduces grad f(x_k) exactly and each step has
        // length eta bitwise.
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, 0.5]));
        let problem = make_quadratic(h, DVector::zeros(3), Some(2.0)).unwrap();
        let params = SolverParams::practical(1e-9, 1e-4, 0.01)
            .unwrap()
            .with_s1(1)
            .unwrap()
            .with_s2(1)
            .unwrap()
            .with_q(4)
            .unwrap()
            .with_eta(0.05)
            .unwrap()
            .with_k_max(20)
            .unwrap()
            .with_record_iterates(true);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x0 = DVector::from_vec(vec![3.0, -2.0, 1.0]);
        let report = zo_spider_coord(&problem, &x0, &params, &mut rng).unwrap();
        assert_eq!(report.termination, Termination::IterationCapReached);
        assert_eq!(report.spider_diag.len(), 20);
        for (k, diag) in report.spider_diag.iter().enumerate() {
            assert_eq!(diag.refresh, k % 4 == 0, "refresh pattern at k={k}");
            let exact = problem.analytic_gradient(&diag.x).unwrap();
            assert!((&diag.v - &exact).norm() < 1e-8, "estimate drift at k={k}");
        }
        for w in report.spider_diag.windows(2) {
            let step = (&w[1].x - &w[0].x).norm();
            assert!((step - 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn coord_exit_carries_the_printed_gradient_guarantee() {
        let d = 10;
        let problem = sample_cubic_reg_stochastic(d, 7, 1.0, 64).unwrap();
        let ell = problem.profile().ell;
        // Unmetered analytic preroll to a near-stationary start.
        let mut x = DVector::from_element(d, 0.3);
        for _ in 0..5_000 {
            let g = problem.analytic_gradient(&x).unwrap();
            if g.norm() <= 5e-3 {
                break;
            }
            x -= g / (2.0 * ell);
        }
        assert!(problem.analytic_gradient(&x).unwrap().norm() <= 5e-3);
        let eps = 1e-2;
        let params = SolverParams::practical(eps, 0.1, 0.01).unwrap().with_s2(10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let report = zo_spider_coord(&problem, &x, &params, &mut rng).unwrap();
        assert_eq!(report.termination, Termination::GradConverged);
        let verify = report.events_tagged("verify");
        assert_eq!(verify.len(), 1);
        match verify[0].event {
            Event::Verify { observed_norm, .. } => assert!(observed_norm <= 2.0 * eps),
            _ => unreachable!(),
        }
        let grad = problem.analytic_gradient(&report.x_star).unwrap().norm();
        assert!(grad <= 3.0 * eps, "terminal gradient {grad}");
    }

    #[test]
    fn estimate_quality_violations_stay_rare() {
        // |S1| defaults to the full component set here, so refreshes are
        // exact up to smoothing bias and only the correction drift between
        // refreshes can violate ||v - grad f||^2 <= eps * eps_tilde.
        let d = 20;
        let problem = sample_cubic_reg_stochastic(d, 3, 1.0, 256).unwrap();
        let ell = problem.profile().ell;
        let eps = 1e-2;
        let params = SolverParams::practical(eps, 0.1, 0.01)
            .unwrap()
            .with_s2(10)
            .unwrap()
            .with_eta(1.0 / (15.0 * ell))
            .unwrap()
            .with_k_max(400)
            .unwrap()
            .with_record_iterates(true);
        let sched = resolve_spider_coord(&problem, &params).unwrap();
        assert_eq!(sched.s1, 256);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x0 = DVector::from_element(d, 1.0);
        let report = zo_spider_coord(&problem, &x0, &params, &mut rng).unwrap();
        assert_eq!(report.termination, Termination::IterationCapReached);
        assert_eq!(report.spider_diag.len(), 400);
        let bound = eps * sched.eps_tilde;
        let violations = report
            .spider_diag
            .iter()
            .filter(|diag| {
                let err = &diag.v - problem.analytic_gradient(&diag.x).unwrap();
                err.norm_squared() > bound
            })
            .count();
        assert!(violations <= 20, "{violations} of 400 estimates out of bound");
    }

    #[test]
    fn nc_mini_epoch_displaces_by_delta_over_rho() {
        // One outer round at an exact saddle: the NCF direction is applied
        // as mini_epoch equal steps, so the total displacement is
        // mini_epoch * eta = delta/rho up to the ceiling.
        let d = 6;
        let problem = sample_cubic_reg_stochastic(d, 1, 1.0, 16).unwrap();
        let ell = problem.profile().ell;
        let delta = 0.1;
        let eta = 1.0 / (15.0 * ell);
        let params = SolverParams::practical(1e-2, delta, 0.01)
            .unwrap()
            .with_eta(eta)
            .unwrap()
            .with_s2(2)
            .unwrap()
            .with_k_max(1)
            .unwrap()
            .with_ncf_t_max(6_000)
            .unwrap();
        let sched = resolve_spider_ncf(&problem, &params).unwrap();
        assert_eq!(sched.mini_epoch, 150);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x0 = DVector::zeros(d);
        let report = zo_spider_ncf(&problem, &x0, &params, &mut rng).unwrap();
        assert_eq!(report.termination, Termination::IterationCapReached);
        let calls = report.events_tagged("ncf_call");
        assert_eq!(calls.len(), 1);
        assert_eq!(calls[0].event, Event::NcfCall { found_direction: true });
        let nc_steps = report.events_tagged("nc_step");
        assert_eq!(nc_steps.len(), 150);
        let moved = (&report.x_star - &x0).norm();
        assert!((moved - 150.0 * eta).abs() < 1e-10, "displacement {moved}");
    }

    #[test]
    fn certifies_stochastic_cubic_with_both_guarantees() {
        let d = 20;
        let problem = sample_cubic_reg_stochastic(d, 13, 1.0, 256).unwrap();
        let ell = problem.profile().ell;
        let eps = 1e-2;
        let delta = 0.1;
        let params = SolverParams::practical(eps, delta, 0.01)
            .unwrap()
            .with_eta(1.0 / (15.0 * ell))
            .unwrap()
            .with_s2(10)
            .unwrap()
            .with_mini_epoch(3_000)
            .unwrap()
            .with_budget(60_000_000)
            .unwrap()
            .with_ncf_t_max(30_000)
            .unwrap()
            .with_ncf_kappa(0.1)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let report = zo_spider_ncf(&problem, &DVector::zeros(d), &params, &mut rng).unwrap();
        assert_eq!(report.termination, Termination::SospCertified);
        let h = problem.analytic_hessian(&report.x_star).unwrap();
        assert!(
            spectral::lambda_min(&h) >= -2.0 * delta - 1e-9,
            "lambda_min {}",
            spectral::lambda_min(&h)
        );
        let grad = problem.analytic_gradient(&report.x_star).unwrap().norm();
        assert!(grad <= 3.0 * eps, "terminal gradient {grad}");
        // Every NCF call is recorded, Bottom and Direction alike.
        assert!(!report.events_tagged("ncf_call").is_empty());
    }
}

//! Perturbed approximate gradient descent: forward-difference coordinate
//! gradient steps while the estimated norm clears 3/4 g_thres, otherwise an
//! EscapeSaddle round that perturbs uniformly in a radius-r ball and descends
//! up to t_thres steps, succeeding once the decrease from the entry point
//! reaches f_thres. A failed round returns the entry point unchanged, which
//! terminates the outer loop.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{require_positive, Error, Result};
use crate::estimators::coord_grad_forward;
use crate::oracle::{BlackBoxProblem, Phase};
use crate::solvers::{Event, Recorder, SolverReport, Termination};

use super::sample_uniform_ball;

/// Schedule for [`pagd_run`]. `new` fills the smoothing steps from g_thres
/// with unit c_h; `theory` derives every field from the printed
/// initialization block.
#[derive(Debug, Clone)]
pub struct PagdParams {
    /// Descent step size.
    pub eta: f64,
    /// Perturbation ball radius.
    pub r: f64,
    /// Gradient-norm gate: descend while ||z|| >= 3/4 g_thres.
    pub g_thres: f64,
    /// Decrease certifying a successful escape.
    pub f_thres: f64,
    /// Escape descent steps per round.
    pub t_thres: usize,
    /// Forward-difference smoothing for the outer gradient gate,
    /// g_thres/(4 c_h).
    pub h_outer: f64,
    /// Forward-difference smoothing inside EscapeSaddle.
    pub h_low: f64,
    /// Hard query cap for `pagd_run`.
    pub query_budget: u64,
    /// Outer iteration cap; None runs to the query budget.
    pub t_max: Option<usize>,
}

impl PagdParams {
    pub fn new(eta: f64, r: f64, g_thres: f64, f_thres: f64, t_thres: usize) -> Result<Self> {
        require_positive("eta", eta)?;
        require_positive("r", r)?;
        require_positive("g_thres", g_thres)?;
        require_positive("f_thres", f_thres)?;
        if t_thres == 0 {
            return Err(Error::param("t_thres", "escape length must be at least 1".to_string()));
        }
        let h = g_thres / 4.0;
        Ok(Self {
            eta,
            r,
            g_thres,
            f_thres,
            t_thres,
            h_outer: h,
            h_low: h,
            query_budget: 10_000_000,
            t_max: None,
        })
    }

    /// Printed initialization block with confidence parameter `conf` and
    /// unit c_h:
    /// chi = 3 max(ln(d ell delta_f / (c eps^2 conf)), 4), eta = c/ell,
    /// r = sqrt(c) eps / (chi^2 ell), g_thres = sqrt(c) eps / chi^2,
    /// f_thres = (c/chi^3) sqrt(eps^3/rho),
    /// t_thres = (chi/c^2) ell / sqrt(rho eps),
    /// h_low = min(g_thres, r rho conf S / (2 sqrt d)) with
    /// S = sqrt(c) sqrt(rho eps) / (chi rho).
    pub fn theory(
        d: usize,
        ell: f64,
        rho: f64,
        delta_f: f64,
        eps: f64,
        c: f64,
        conf: f64,
    ) -> Result<Self> {
        require_positive("ell", ell)?;
        require_positive("rho", rho)?;
        require_positive("delta_f", delta_f)?;
        require_positive("eps", eps)?;
        require_positive("c", c)?;
        require_positive("conf", conf)?;
        let df = d as f64;
        let chi = 3.0 * (df * ell * delta_f / (c * eps * eps * conf)).ln().max(4.0);
        let eta = c / ell;
        let r = c.sqrt() / (chi * chi) * eps / ell;
        let g_thres = c.sqrt() / (chi * chi) * eps;
        let f_thres = c / chi.powi(3) * (eps.powi(3) / rho).sqrt();
        let t_thres = (chi / (c * c) * ell / (rho * eps).sqrt()).ceil() as usize;
        let s = c.sqrt() / chi * (rho * eps).sqrt() / rho;
        let h_low = g_thres.min(r * rho * conf * s / (2.0 * df.sqrt()));
        let mut params = Self::new(eta, r, g_thres, f_thres, t_thres.max(1))?;
        params.h_low = h_low;
        Ok(params)
    }

    pub fn with_h_low(mut self, h_low: f64) -> Result<Self> {
        require_positive("h_low", h_low)?;
        self.h_low = h_low;
        Ok(self)
    }

    pub fn with_budget(mut self, budget: u64) -> Result<Self> {
        if budget == 0 {
            return Err(Error::param("query_budget", "budget must be positive".to_string()));
        }
        self.query_budget = budget;
        Ok(self)
    }

    pub fn with_t_max(mut self, t_max: usize) -> Result<Self> {
        if t_max == 0 {
            return Err(Error::param("t_max", "iteration cap must be at least 1".to_string()));
        }
        self.t_max = Some(t_max);
        Ok(self)
    }
}

/// EscapeSaddle: perturb, then descend while checking the decrease from the
/// entry point; `(point, true)` once the gain reaches f_thres, `(entry,
/// false)` after t_thres + 1 failed checks. Costs 1 + (checks)(d + 2)
/// queries on single-component objectives.
fn escape_saddle<R: Rng + ?Sized>(
    problem: &BlackBoxProblem,
    x_hat: &DVector<f64>,
    params: &PagdParams,
    rng: &mut R,
) -> Result<(DVector<f64>, bool)> {
    let f_hat = problem.eval_full(x_hat, Phase::Other);
    let xi = sample_uniform_ball(problem.dim(), params.r, rng);
    let mut xt = x_hat + xi;
    for _ in 0..=params.t_thres {
        let ft = problem.eval_full(&xt, Phase::Other);
        if f_hat - ft >= params.f_thres {
            return Ok((xt, true));
        }
        let grad = coord_grad_forward(problem, &[0], &xt, params.h_low, Phase::GradEst)?;
        xt -= params.eta * grad.g;
    }
    Ok((x_hat.clone(), false))
}

/// Runs the printed outer loop. Terminates with `GradConverged` when an
/// EscapeSaddle round fails (the algorithm's own stopping rule), otherwise on
/// the iteration cap or query budget. Requires a single-component objective.
pub fn pagd_run<R: Rng + ?Sized>(
    problem: &BlackBoxProblem,
    x0: &DVector<f64>,
    params: &PagdParams,
    rng: &mut R,
) -> Result<SolverReport> {
    if x0.len() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), got: x0.len() });
    }
    if problem.n_components() != 1 {
        return Err(Error::param(
            "problem",
            "pagd is defined for deterministic (single-component) objectives".to_string(),
        ));
    }
    let d = problem.dim() as u64;
    // One gate plus a full escape round, the largest single iteration.
    let worst_iter_cost = (d + 1) + 1 + (params.t_thres as u64 + 1) * (d + 2);
    let mut rec = Recorder::new(problem);
    let mut x = x0.clone();
    let mut t = 0usize;
    loop {
        if let Some(cap) = params.t_max {
            if t >= cap {
                return Ok(rec.finish(problem, x, Termination::IterationCapReached));
            }
        }
        if rec.spent(problem) + worst_iter_cost > params.query_budget {
            return Ok(rec.finish(problem, x, Termination::QueryBudgetExhausted));
        }
        let z = coord_grad_forward(problem, &[0], &x, params.h_outer, Phase::GradEst)?;
        if z.g.norm() >= 0.75 * params.g_thres {
            x -= params.eta * &z.g;
            rec.record(
                problem,
                &x,
                Event::Descent { step_norm: params.eta * z.g.norm(), batch: 1 },
            );
        } else {
            let (next, escaped) = escape_saddle(problem, &x, params, rng)?;
            x = next;
            rec.record(problem, &x, Event::NcfCall { found_direction: escaped });
            if !escaped {
                return Ok(rec.finish(problem, x, Termination::GradConverged));
            }
        }
        t += 1;
    }
}

//! Random search with power iterations: a derivative-free baseline that
//! alternates a plain random-search triplet with a triplet along a negative
//! curvature direction produced by derivative-free power iteration (DFPI).
//!
//! Each outer pass costs `4 n + 4 d n t_dfpi` queries: two full evaluations
//! per triplet (the incumbent value is cached) plus two central-difference
//! coordinate gradients per DFPI step. Ties go to the incumbent, so the
//! recorded objective trajectory is nonincreasing.

use crate::error::{require_positive, Error, Result};
use crate::estimators::{coord_grad_central, sample_unit_sphere};
use crate::oracle::{BlackBoxProblem, Phase};
use crate::solvers::{full_batch, Event, Recorder, SolverReport, Termination};
use nalgebra::DVector;
use rand::Rng;

/// Tuning for `rspi_run` and its `dfpi` inner routine.
#[derive(Debug, Clone)]
pub struct RspiParams {
    /// Random-search triplet radius, decayed by `rho_sigma1` every
    /// `t_sigma1` passes.
    pub sigma1: f64,
    /// Curvature triplet radius, held constant.
    pub sigma2: f64,
    /// Multiplicative decay of `sigma1`, in (0, 1].
    pub rho_sigma1: f64,
    /// Passes between decays of `sigma1`.
    pub t_sigma1: usize,
    /// DFPI steps per pass.
    pub t_dfpi: usize,
    /// Coordinate step of the DFPI finite-difference gradients.
    pub dfpi_c: f64,
    /// Offset radius of the DFPI probe points x +- r s.
    pub dfpi_r: f64,
    /// DFPI step size. None resolves to 1/(2 ell) from the problem profile,
    /// which keeps the iteration map I - eta H expansive only along negative
    /// curvature.
    pub dfpi_eta: Option<f64>,
    pub query_budget: u64,
    /// Outer pass cap. None runs to the query budget.
    pub k_max: Option<usize>,
}

impl RspiParams {
    pub fn new(
        sigma1: f64,
        sigma2: f64,
        rho_sigma1: f64,
        t_sigma1: usize,
        t_dfpi: usize,
    ) -> Result<Self> {
        require_positive("sigma1", sigma1)?;
        require_positive("sigma2", sigma2)?;
        require_positive("rho_sigma1", rho_sigma1)?;
        if rho_sigma1 > 1.0 {
            return Err(Error::param("rho_sigma1", "decay factor must be at most 1"));
        }
        if t_sigma1 == 0 {
            return Err(Error::param("t_sigma1", "decay period must be at least 1"));
        }
        if t_dfpi == 0 {
            return Err(Error::param("t_dfpi", "power iteration needs at least one step"));
        }
        Ok(RspiParams {
            sigma1,
            sigma2,
            rho_sigma1,
            t_sigma1,
            t_dfpi,
            dfpi_c: 1e-4,
            dfpi_r: 1e-3,
            dfpi_eta: None,
            query_budget: 10_000_000,
            k_max: None,
        })
    }

    pub fn with_dfpi_c(mut self, c: f64) -> Result<Self> {
        require_positive("dfpi_c", c)?;
        self.dfpi_c = c;
        Ok(self)
    }

    pub fn with_dfpi_r(mut self, r: f64) -> Result<Self> {
        require_positive("dfpi_r", r)?;
        self.dfpi_r = r;
        Ok(self)
    }

    pub fn with_dfpi_eta(mut self, eta: f64) -> Result<Self> {
        require_positive("dfpi_eta", eta)?;
        self.dfpi_eta = Some(eta);
        Ok(self)
    }

    pub fn with_budget(mut self, budget: u64) -> Result<Self> {
        if budget == 0 {
            return Err(Error::param("query_budget", "must be positive"));
        }
        self.query_budget = budget;
        Ok(self)
    }

    pub fn with_k_max(mut self, k_max: usize) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::param("k_max", "must be positive"));
        }
        self.k_max = Some(k_max);
        Ok(self)
    }
}

/// Derivative-free power iteration. From a uniform sphere start, `t_dfpi`
/// steps of
///
/// ```text
/// s <- normalize(s - eta (g(x + r s) - g(x - r s)) / (2 r))
/// ```
///
/// where g is the central-difference coordinate gradient over the full
/// component range. The bracket approximates H(x) s, so the update is power
/// iteration on I - eta H, and for eta < 1/ell the dominant eigenvector is
/// the most negative curvature direction whenever one exists. Costs
/// `4 d n` queries per step, metered as `Phase::Ncf`.
pub fn dfpi<R: Rng + ?Sized>(
    problem: &BlackBoxProblem,
    x: &DVector<f64>,
    params: &RspiParams,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let d = problem.dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    let eta = match params.dfpi_eta {
        Some(eta) => eta,
        None => 1.0 / (2.0 * problem.profile().ell),
    };
    let batch = full_batch(problem.n_components());
    let mut s = sample_unit_sphere(d, rng);
    for _ in 0..params.t_dfpi {
        let plus = x + params.dfpi_r * &s;
        let minus = x - params.dfpi_r * &s;
        let gp = coord_grad_central(problem, &batch, &plus, params.dfpi_c, Phase::Ncf)?;
        let gm = coord_grad_central(problem, &batch, &minus, params.dfpi_c, Phase::Ncf)?;
        s -= eta / (2.0 * params.dfpi_r) * (gp.g - gm.g);
        let norm = s.norm();
        if norm > 0.0 {
            s /= norm;
        } else {
            // Exact cancellation: restart rather than divide by zero.
            s = sample_unit_sphere(d, rng);
        }
    }
    Ok(s)
}

/// Runs the alternating baseline from `x0`. Each pass draws u uniform on the
/// sphere and replaces the incumbent by the argmin of {x, x + sigma1 u,
/// x - sigma1 u} (ties keep the incumbent), runs DFPI from the pass-start
/// point, then takes the argmin of the triplet along the returned direction
/// at radius sigma2. Triplet evaluations are metered as `Phase::Other`,
/// DFPI as `Phase::Ncf`. Terminates on the pass cap (`IterationCapReached`)
/// or when the next pass would overdraw the budget
/// (`QueryBudgetExhausted`); there is no stationarity test.
pub fn rspi_run<R: Rng + ?Sized>(
    problem: &BlackBoxProblem,
    x0: &DVector<f64>,
    params: &RspiParams,
    rng: &mut R,
) -> Result<SolverReport> {
    let d = problem.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x0.len() });
    }
    let n = problem.n_components();
    let pass_cost = 4 * n as u64 + 4 * (d as u64) * (n as u64) * params.t_dfpi as u64;
    let mut rec = Recorder::new(problem);
    let mut x = x0.clone();
    if (n as u64) > params.query_budget {
        return Ok(rec.finish(problem, x, Termination::QueryBudgetExhausted));
    }
    let mut f_x = problem.eval_full(&x, Phase::Other);
    let mut sigma1 = params.sigma1;
    let mut pass = 0usize;
    loop {
        if params.k_max.is_some_and(|k| pass >= k) {
            return Ok(rec.finish(problem, x, Termination::IterationCapReached));
        }
        if rec.spent(problem) + pass_cost > params.query_budget {
            return Ok(rec.finish(problem, x, Termination::QueryBudgetExhausted));
        }
        let x_pass = x.clone();
        let u = sample_unit_sphere(d, rng);
        let f_plus = problem.eval_full(&(&x + sigma1 * &u), Phase::Other);
        let f_minus = problem.eval_full(&(&x - sigma1 * &u), Phase::Other);
        let mut step_norm = 0.0;
        if f_plus < f_x && f_plus <= f_minus {
            x += sigma1 * &u;
            f_x = f_plus;
            step_norm = sigma1;
        } else if f_minus < f_x {
            x -= sigma1 * &u;
            f_x = f_minus;
            step_norm = sigma1;
        }
        rec.record(problem, &x, Event::Descent { step_norm, batch: n });
        // The curvature direction is estimated at the pass-start point, not
        // at the post-move incumbent.
        let s = dfpi(problem, &x_pass, params, rng)?;
        let f_plus = problem.eval_full(&(&x + params.sigma2 * &s), Phase::Other);
        let f_minus = problem.eval_full(&(&x - params.sigma2 * &s), Phase::Other);
        if f_plus < f_x && f_plus <= f_minus {
            x += params.sigma2 * &s;
            f_x = f_plus;
            rec.record(problem, &x, Event::NcStep { sign: 1.0 });
        } else if f_minus < f_x {
            x -= params.sigma2 * &s;
            f_x = f_minus;
            rec.record(problem, &x, Event::NcStep { sign: -1.0 });
        } else {
            rec.record(problem, &x, Event::Descent { step_norm: 0.0, batch: n });
        }
        pass += 1;
        if pass % params.t_sigma1 == 0 {
            sigma1 *= params.rho_sigma1;
        }
    }
}

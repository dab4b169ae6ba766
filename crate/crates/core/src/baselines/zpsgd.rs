//! Perturbed stochastic gradient descent from Gaussian-smoothed zeroth-order
//! estimates: each step averages m forward differences f(x + z) - f(x) along
//! Gaussian directions z ~ N(0, sigma_g^2 I) into a gradient estimate, then
//! descends with an added uniform-ball perturbation.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{require_positive, Error, Result};
use crate::oracle::{BlackBoxProblem, Phase};
use crate::solvers::{Event, Recorder, SolverReport, Termination};

use super::sample_uniform_ball;

/// Schedule for [`zpsgd_run`]. The benchmark tables use eta = 1/(2 ell),
/// noise_r = epsilon, m = d.
#[derive(Debug, Clone)]
pub struct ZpsgdParams {
    /// Step size.
    pub eta: f64,
    /// Radius of the uniform perturbation ball.
    pub noise_r: f64,
    /// Mini-batch of Gaussian directions per step.
    pub m: usize,
    /// Gaussian smoothing scale sigma_g.
    pub sigma_g: f64,
    /// Hard query cap for `zpsgd_run`.
    pub query_budget: u64,
    /// Iteration cap; None runs to the query budget.
    pub t_max: Option<usize>,
}

impl ZpsgdParams {
    pub fn new(eta: f64, noise_r: f64, m: usize) -> Result<Self> {
        require_positive("eta", eta)?;
        require_positive("noise_r", noise_r)?;
        if m == 0 {
            return Err(Error::param("m", "mini-batch must be at least 1".to_string()));
        }
        Ok(Self { eta, noise_r, m, sigma_g: 0.01, query_budget: 10_000_000, t_max: None })
    }

    /// Benchmark-table schedule: eta = 1/(2 ell), noise_r = eps, m = d.
    pub fn from_table(ell: f64, eps: f64, d: usize) -> Result<Self> {
        require_positive("ell", ell)?;
        Self::new(1.0 / (2.0 * ell), eps, d)
    }

    pub fn with_sigma_g(mut self, sigma_g: f64) -> Result<Self> {
        require_positive("sigma_g", sigma_g)?;
        self.sigma_g = sigma_g;
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

fn check_point(problem: &BlackBoxProblem, x: &DVector<f64>) -> Result<()> {
    if x.len() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), got: x.len() });
    }
    Ok(())
}

/// The listed estimator: g = sum_i z_i [f(x + z_i) - f(x)] / (m sigma_g^2)
/// with z_i ~ N(0, sigma_g^2 I). Costs (m + 1) full-objective evaluations.
pub fn zpsgd_gradient<R: Rng + ?Sized>(
    problem: &BlackBoxProblem,
    x: &DVector<f64>,
    params: &ZpsgdParams,
    rng: &mut R,
) -> Result<DVector<f64>> {
    check_point(problem, x)?;
    let d = problem.dim();
    let base = problem.eval_full(x, Phase::GradEst);
    let mut g = DVector::zeros(d);
    for _ in 0..params.m {
        let z = params.sigma_g
            * DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let fz = problem.eval_full(&(x + &z), Phase::GradEst);
        g += z * (fz - base);
    }
    Ok(g / (params.m as f64 * params.sigma_g * params.sigma_g))
}

/// One listed iteration: x - eta (g + xi) with xi uniform in the noise ball.
/// Costs (m + 1) full-objective evaluations.
pub fn zpsgd_step<R: Rng + ?Sized>(
    problem: &BlackBoxProblem,
    x: &DVector<f64>,
    params: &ZpsgdParams,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let g = zpsgd_gradient(problem, x, params, rng)?;
    let xi = sample_uniform_ball(problem.dim(), params.noise_r, rng);
    Ok(x - params.eta * (g + xi))
}

/// Iterates [`zpsgd_step`] until the iteration cap or query budget.
pub fn zpsgd_run<R: Rng + ?Sized>(
    problem: &BlackBoxProblem,
    x0: &DVector<f64>,
    params: &ZpsgdParams,
    rng: &mut R,
) -> Result<SolverReport> {
    check_point(problem, x0)?;
    let step_cost = (params.m as u64 + 1) * problem.n_components() as u64;
    let mut rec = Recorder::new(problem);
    let mut x = x0.clone();
    let mut t = 0usize;
    loop {
        if let Some(cap) = params.t_max {
            if t >= cap {
                return Ok(rec.finish(problem, x, Termination::IterationCapReached));
            }
        }
        if rec.spent(problem) + step_cost > params.query_budget {
            return Ok(rec.finish(problem, x, Termination::QueryBudgetExhausted));
        }
        let next = zpsgd_step(problem, &x, params, rng)?;
        let step_norm = (&next - &x).norm();
        x = next;
        rec.record(problem, &x, Event::Descent { step_norm, batch: params.m });
        t += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{make_octopus, make_quadratic, Objective, SmoothnessProfile};
    use crate::solvers::{zo_gd_ncf, SolverParams};
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    struct Linear {
        g: DVector<f64>,
    }

    impl Objective for Linear {
        fn dim(&self) -> usize {
            self.g.len()
        }
        fn n_components(&self) -> usize {
            1
        }
        fn component(&self, _i: usize, x: &DVector<f64>) -> f64 {
            self.g.dot(x)
        }
    }

    fn linear_problem(g: Vec<f64>) -> BlackBoxProblem {
        let obj = Linear { g: DVector::from_vec(g) };
        BlackBoxProblem::new(Arc::new(obj), SmoothnessProfile::new(1.0, 0.0, 0.0).unwrap())
            .unwrap()
    }

    #[test]
    fn constant_objective_step_is_pure_noise() {
        // f = 0 everywhere: the estimator vanishes exactly, so the step is
        // -eta xi with ||xi|| <= noise_r.
        let problem =
            make_quadratic(DMatrix::zeros(3, 3), DVector::zeros(3), Some(1.0)).unwrap();
        let params = ZpsgdParams::new(0.25, 0.5, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let next = zpsgd_step(&problem, &x, &params, &mut rng).unwrap();
        assert!((&next - &x).norm() <= 0.25 * 0.5 + 1e-15);
        assert_eq!(problem.ledger().total(), 9);
    }

    #[test]
    fn linear_gradient_is_unbiased() {
        // E[z z^T] = sigma^2 I makes Gaussian smoothing exact on linear f.
        let g0 = vec![1.0, -0.5, 0.25, 2.0];
        let problem = linear_problem(g0.clone());
        let params = ZpsgdParams::new(0.1, 1e-3, 64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = DVector::zeros(4);
        let reps = 200;
        let mut mean = DVector::zeros(4);
        for _ in 0..reps {
            mean += zpsgd_gradient(&problem, &x, &params, &mut rng).unwrap();
        }
        mean /= reps as f64;
        // Per-coordinate sd ~ sqrt(2) ||g0|| / sqrt(m reps) ~ 0.029.
        let err = (mean - DVector::from_vec(g0)).norm();
        assert!(err < 0.1, "estimator bias {err}");
    }

    #[test]
    fn ledger_is_m_plus_one_per_iteration() {
        let problem =
            make_quadratic(DMatrix::identity(3, 3), DVector::zeros(3), Some(1.0)).unwrap();
        let params = ZpsgdParams::new(0.1, 0.01, 5).unwrap().with_t_max(7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let report =
            zpsgd_run(&problem, &DVector::from_element(3, 1.0), &params, &mut rng).unwrap();
        assert_eq!(report.termination, Termination::IterationCapReached);
        assert_eq!(report.trajectory.len(), 7);
        assert_eq!(report.queries_spent(), 7 * 6);
        for (i, r) in report.trajectory.iter().enumerate() {
            assert_eq!(r.query_total, 6 * (i as u64 + 1));
        }
    }

    #[test]
    fn budget_stops_before_overdraft() {
        let problem =
            make_quadratic(DMatrix::identity(2, 2), DVector::zeros(2), Some(1.0)).unwrap();
        // 3 steps of cost 4 fit in 13; a 4th would overdraw.
        let params = ZpsgdParams::new(0.1, 0.01, 3).unwrap().with_budget(13).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let report =
            zpsgd_run(&problem, &DVector::from_element(2, 1.0), &params, &mut rng).unwrap();
        assert_eq!(report.termination, Termination::QueryBudgetExhausted);
        assert_eq!(report.trajectory.len(), 3);
        assert_eq!(report.queries_spent(), 12);
    }

    #[test]
    fn gd_ncf_escapes_octopus_faster_at_equal_budget() {
        // Same query budget on octopus d = 10; the NCF solver reaches a
        // deeper point than ZPSGD in at least 4 of 5 seeds.
        let tau = std::f64::consts::E;
        let d = 10;
        let eps = 1e-4;
        let budget = 1_500_000u64;
        let mut wins = 0;
        for seed in 0..5u64 {
            let problem = make_octopus(d, tau, tau, 1.0).unwrap();
            let zp = ZpsgdParams::from_table(tau, eps, d)
                .unwrap()
                .with_budget(budget)
                .unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let zp_report = zpsgd_run(&problem, &DVector::zeros(d), &zp, &mut rng).unwrap();
            let f_zpsgd = problem.full_value_unmetered(&zp_report.x_star);

            let fresh = problem.fresh();
            let gd = SolverParams::practical(eps, (tau * eps).sqrt(), 0.01)
                .unwrap()
                .with_budget(budget)
                .unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gd_report = zo_gd_ncf(&fresh, &DVector::zeros(d), &gd, &mut rng).unwrap();
            let f_gd = fresh.full_value_unmetered(&gd_report.x_star);
            if f_gd < f_zpsgd {
                wins += 1;
            }
        }
        assert!(wins >= 4, "NCF solver won only {wins}/5 seeds");
    }
}

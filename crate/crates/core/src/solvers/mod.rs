//! Solvers that find (epsilon, delta)-approximate second-order stationary
//! points from function queries alone, alternating a gradient-norm
//! verification gate with descent while the gradient is large and an NCF
//! escape attempt once it is small:
//!
//! - [`zo_gd_ncf`]: full coordinate gradients, deterministic (Chebyshev) NCF;
//! - [`zo_sgd_ncf`]: mini-batch gradients, online (stochastic-power) NCF;
//! - [`zo_scsg_ncf`] / [`zo_scsg_epoch`]: variance-reduced epochs anchored at
//!   a large-batch gradient, with geometric epoch lengths;
//! - [`zo_spider_ncf`] / [`zo_spider_coord`]: recursive path-tracking
//!   estimates refreshed every q steps, normalized steps, and (for the NCF
//!   variant) fixed-length negative-curvature mini-epochs.
//!
//! One [`SolverParams`] carries every tunable; fields left at `None` resolve
//! per solver from the preset. The theory preset reproduces the printed
//! schedules (iteration caps need `delta_f` on the problem's smoothness
//! profile); the practical preset derives iteration caps from the query
//! budget and keeps the same step and smoothing formulas. Every run returns
//! a [`SolverReport`] whose trajectory and ledger snapshot account for each
//! event to the query.

mod gd;
mod report;
mod scsg;
mod sgd;
mod spider;
mod step;

pub use gd::{resolve_gd, zo_gd_ncf, GdSchedule};
pub(crate) use report::Recorder;
pub use report::{Event, SolverReport, SpiderDiag, Termination, TrajectoryRecord};
pub use scsg::{
    resolve_scsg, sample_epoch_length, zo_scsg_epoch, zo_scsg_ncf, EpochStats, ScsgSchedule,
};
pub use sgd::{resolve_sgd, zo_sgd_ncf, SgdSchedule};
pub use spider::{
    resolve_spider_coord, resolve_spider_ncf, zo_spider_coord, zo_spider_ncf, SpiderSchedule,
};
pub use step::{negative_curvature_step, negative_curvature_step_greedy};

use crate::error::{require_positive, require_probability, Error, Result};
use crate::estimators::{
    classify_norm, coord_grad_central, verify_gradient_norm, VerifyMode, VerifyOutcome,
};
use crate::ncf::NcfParams;
use crate::oracle::{BlackBoxProblem, Phase};
use rand::Rng;

/// Gradient-estimator option shared by all solvers: I = coordinate-wise
/// central differences (2d queries per point), II = random-direction central
/// differences (2 queries per point).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradOption {
    I,
    II,
}

/// Theory resolves schedules from the printed formulas; Practical keeps the
/// same step and smoothing rules but derives iteration caps from the query
/// budget so default runs terminate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverPreset {
    Theory,
    Practical,
}

/// Every solver tunable in one bag. `None` fields resolve per solver and
/// preset; see each solver's `resolve_*` for the formulas it applies.
#[derive(Debug, Clone)]
pub struct SolverParams {
    pub epsilon: f64,
    pub delta: f64,
    /// Failure probability of the whole run; split across iterations when a
    /// solver calls randomized subroutines.
    pub p: f64,
    pub option: GradOption,
    pub preset: SolverPreset,
    /// Soft query cap, checked between events.
    pub query_budget: u64,
    /// Pick the NC jump sign by two metered full evaluations instead of a
    /// fair coin.
    pub greedy_nc_sign: bool,
    /// Populate `SolverReport::spider_diag` (SPIDER solvers only).
    pub record_iterates: bool,
    /// Step size.
    pub eta: Option<f64>,
    /// Iteration cap K (outer cap J for ZO-SPIDER-NCF).
    pub k_max: Option<usize>,
    /// Verification smoothing; `None` delegates to the verifier's own rule.
    pub mu1: Option<f64>,
    /// Descent-estimate smoothing (the SPIDER solvers' single mu).
    pub mu2: Option<f64>,
    /// ZO-SGD-NCF descent batch |S|.
    pub s_batch: Option<usize>,
    /// ZO-SCSG anchor batch B.
    pub big_b: Option<usize>,
    /// ZO-SCSG inner batch b.
    pub small_b: Option<usize>,
    /// SPIDER refresh batch |S1|.
    pub s1: Option<usize>,
    /// SPIDER step batch |S2|.
    pub s2: Option<usize>,
    /// SPIDER refresh period q.
    pub q: Option<usize>,
    /// SPIDER free parameter n0 in [1, 2 sigma / epsilon].
    pub n0: Option<f64>,
    /// eps_tilde = factor * epsilon for the SPIDER exit tests.
    pub eps_tilde_factor: Option<f64>,
    /// SPIDER-NCF mini-epoch length (steps per outer iteration).
    pub mini_epoch: Option<usize>,
    /// Unspecified constant c in the SCSG smoothing mu2 = eps/(4 sqrt(cd) l).
    pub scsg_c: f64,
    /// NCF schedule overrides forwarded to every NCF call this run makes.
    pub ncf_kappa: Option<f64>,
    pub ncf_t_max: Option<usize>,
    pub ncf_eta: Option<f64>,
    pub ncf_sigma: Option<f64>,
    pub ncf_r: Option<f64>,
}

impl SolverParams {
    fn new(epsilon: f64, delta: f64, p: f64, preset: SolverPreset) -> Result<Self> {
        require_positive("epsilon", epsilon)?;
        require_positive("delta", delta)?;
        require_probability("p", p)?;
        Ok(SolverParams {
            epsilon,
            delta,
            p,
            option: GradOption::I,
            preset,
            query_budget: match preset {
                SolverPreset::Practical => 10_000_000,
                SolverPreset::Theory => u64::MAX,
            },
            greedy_nc_sign: false,
            record_iterates: false,
            eta: None,
            k_max: None,
            mu1: None,
            mu2: None,
            s_batch: None,
            big_b: None,
            small_b: None,
            s1: None,
            s2: None,
            q: None,
            n0: None,
            eps_tilde_factor: None,
            mini_epoch: None,
            scsg_c: 1.0,
            ncf_kappa: None,
            ncf_t_max: None,
            ncf_eta: None,
            ncf_sigma: None,
            ncf_r: None,
        })
    }

    /// Budget-capped defaults; iteration caps derive from `query_budget`.
    pub fn practical(epsilon: f64, delta: f64, p: f64) -> Result<Self> {
        Self::new(epsilon, delta, p, SolverPreset::Practical)
    }

    /// Printed schedules; iteration caps need `delta_f` on the problem
    /// profile and there is no query budget unless one is set.
    pub fn theory(epsilon: f64, delta: f64, p: f64) -> Result<Self> {
        Self::new(epsilon, delta, p, SolverPreset::Theory)
    }

    pub fn with_option(mut self, option: GradOption) -> Self {
        self.option = option;
        self
    }

    pub fn with_budget(mut self, query_budget: u64) -> Result<Self> {
        if query_budget == 0 {
            return Err(Error::param("query_budget", "must be at least 1"));
        }
        self.query_budget = query_budget;
        Ok(self)
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        require_positive("eta", eta)?;
        self.eta = Some(eta);
        Ok(self)
    }

    pub fn with_k_max(mut self, k_max: usize) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::param("k_max", "must be at least 1"));
        }
        self.k_max = Some(k_max);
        Ok(self)
    }

    pub fn with_mu1(mut self, mu1: f64) -> Result<Self> {
        require_positive("mu1", mu1)?;
        self.mu1 = Some(mu1);
        Ok(self)
    }

    pub fn with_mu2(mut self, mu2: f64) -> Result<Self> {
        require_positive("mu2", mu2)?;
        self.mu2 = Some(mu2);
        Ok(self)
    }

    pub fn with_s_batch(mut self, s: usize) -> Result<Self> {
        if s == 0 {
            return Err(Error::param("s_batch", "must be at least 1"));
        }
        self.s_batch = Some(s);
        Ok(self)
    }

    pub fn with_big_b(mut self, big_b: usize) -> Result<Self> {
        if big_b == 0 {
            return Err(Error::param("big_b", "must be at least 1"));
        }
        self.big_b = Some(big_b);
        Ok(self)
    }

    pub fn with_small_b(mut self, small_b: usize) -> Result<Self> {
        if small_b == 0 {
            return Err(Error::param("small_b", "must be at least 1"));
        }
        self.small_b = Some(small_b);
        Ok(self)
    }

    pub fn with_s1(mut self, s1: usize) -> Result<Self> {
        if s1 == 0 {
            return Err(Error::param("s1", "must be at least 1"));
        }
        self.s1 = Some(s1);
        Ok(self)
    }

    pub fn with_s2(mut self, s2: usize) -> Result<Self> {
        if s2 == 0 {
            return Err(Error::param("s2", "must be at least 1"));
        }
        self.s2 = Some(s2);
        Ok(self)
    }

    pub fn with_q(mut self, q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::param("q", "must be at least 1"));
        }
        self.q = Some(q);
        Ok(self)
    }

    pub fn with_n0(mut self, n0: f64) -> Result<Self> {
        require_positive("n0", n0)?;
        self.n0 = Some(n0);
        Ok(self)
    }

    pub fn with_eps_tilde_factor(mut self, factor: f64) -> Result<Self> {
        require_positive("eps_tilde_factor", factor)?;
        self.eps_tilde_factor = Some(factor);
        Ok(self)
    }

    pub fn with_mini_epoch(mut self, mini_epoch: usize) -> Result<Self> {
        if mini_epoch == 0 {
            return Err(Error::param("mini_epoch", "must be at least 1"));
        }
        self.mini_epoch = Some(mini_epoch);
        Ok(self)
    }

    pub fn with_scsg_c(mut self, c: f64) -> Result<Self> {
        require_positive("scsg_c", c)?;
        self.scsg_c = c;
        Ok(self)
    }

    pub fn with_greedy_nc_sign(mut self, greedy: bool) -> Self {
        self.greedy_nc_sign = greedy;
        self
    }

    pub fn with_record_iterates(mut self, record: bool) -> Self {
        self.record_iterates = record;
        self
    }

    pub fn with_ncf_kappa(mut self, kappa: f64) -> Result<Self> {
        require_positive("ncf_kappa", kappa)?;
        self.ncf_kappa = Some(kappa);
        Ok(self)
    }

    pub fn with_ncf_t_max(mut self, t_max: usize) -> Result<Self> {
        if t_max == 0 {
            return Err(Error::param("ncf_t_max", "must be at least 1"));
        }
        self.ncf_t_max = Some(t_max);
        Ok(self)
    }

    pub fn with_ncf_eta(mut self, eta: f64) -> Result<Self> {
        require_positive("ncf_eta", eta)?;
        self.ncf_eta = Some(eta);
        Ok(self)
    }

    pub fn with_ncf_sigma(mut self, sigma: f64) -> Result<Self> {
        require_positive("ncf_sigma", sigma)?;
        self.ncf_sigma = Some(sigma);
        Ok(self)
    }

    pub fn with_ncf_r(mut self, r: f64) -> Result<Self> {
        require_positive("ncf_r", r)?;
        self.ncf_r = Some(r);
        Ok(self)
    }

    /// Apply the NCF overrides carried in these params to a resolved base.
    pub(crate) fn ncf_with_overrides(&self, base: NcfParams) -> Result<NcfParams> {
        let mut ncf = base;
        if let Some(kappa) = self.ncf_kappa {
            ncf = ncf.with_kappa(kappa)?;
        }
        if let Some(t_max) = self.ncf_t_max {
            ncf = ncf.with_t_max(t_max)?;
        }
        if let Some(eta) = self.ncf_eta {
            ncf = ncf.with_eta(eta)?;
        }
        if let Some(sigma) = self.ncf_sigma {
            ncf = ncf.with_sigma_pert(sigma)?;
        }
        if let Some(r) = self.ncf_r {
            ncf = ncf.with_r(r)?;
        }
        Ok(ncf)
    }

    /// NcfParams for the preset at a per-call confidence, with overrides.
    pub(crate) fn make_ncf(&self, p_call: f64) -> Result<NcfParams> {
        let base = match self.preset {
            SolverPreset::Theory => NcfParams::theory(self.delta, p_call)?,
            SolverPreset::Practical => NcfParams::practical(self.delta, p_call)?,
        };
        self.ncf_with_overrides(base)
    }
}

/// Split confidences computed as p/K can degenerate when K is tiny; clamp
/// into the verifier's open (0, 1) domain.
pub(crate) fn clamp_p(p: f64) -> f64 {
    p.min(0.5).max(f64::MIN_POSITIVE)
}

/// Practical iteration cap: the budget divided by one coordinate sweep of a
/// single component, the cheapest event any solver iteration performs.
pub(crate) fn practical_cap(query_budget: u64, d: usize) -> usize {
    let sweep = 2 * d as u64;
    ((query_budget / sweep.max(1)).max(1)).min(usize::MAX as u64) as usize
}

/// Iteration cap shared resolution: explicit override, else preset rule.
/// `theory_k` is the printed formula's value and needs delta_f.
pub(crate) fn resolve_cap(
    params: &SolverParams,
    problem: &BlackBoxProblem,
    theory_k: impl FnOnce(f64) -> f64,
) -> Result<usize> {
    if let Some(k) = params.k_max {
        return Ok(k);
    }
    match params.preset {
        SolverPreset::Practical => Ok(practical_cap(params.query_budget, problem.dim())),
        SolverPreset::Theory => {
            let delta_f = problem.profile().delta_f.ok_or_else(|| {
                Error::param(
                    "k_max",
                    "theory preset needs delta_f on the smoothness profile (or an explicit k_max)",
                )
            })?;
            Ok((theory_k(delta_f).ceil().max(1.0)) as usize)
        }
    }
}

/// Sorted without-replacement component sample; `want >= n` degrades to the
/// full index set. Matches the verifier's own sampling convention.
pub(crate) fn sample_without_replacement<R: Rng + ?Sized>(
    n: usize,
    want: usize,
    rng: &mut R,
) -> Vec<usize> {
    if want >= n {
        return (0..n).collect();
    }
    let mut idx = rand::seq::index::sample(rng, n, want).into_vec();
    idx.sort_unstable();
    idx
}

/// With-replacement component sample (multiset), as the SPIDER correction
/// batch is defined.
pub(crate) fn sample_with_replacement<R: Rng + ?Sized>(
    n: usize,
    want: usize,
    rng: &mut R,
) -> Vec<usize> {
    (0..want).map(|_| rng.gen_range(0..n)).collect()
}

pub(crate) fn full_batch(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Gradient-norm verification honoring an explicit mu1 override. Without one
/// this is exactly [`verify_gradient_norm`]; with one, the same batch rules
/// are applied around a coordinate estimate at the requested smoothing.
pub(crate) fn verify_at<R: Rng + ?Sized>(
    problem: &BlackBoxProblem,
    x: &nalgebra::DVector<f64>,
    epsilon: f64,
    p_call: f64,
    mode: VerifyMode,
    mu1: Option<f64>,
    rng: &mut R,
) -> Result<VerifyOutcome> {
    let Some(mu) = mu1 else {
        return verify_gradient_norm(problem, x, epsilon, p_call, mode, rng);
    };
    let n = problem.n_components();
    let batch = match mode {
        VerifyMode::Deterministic => full_batch(n),
        VerifyMode::Online => {
            let sigma = problem.profile().sigma;
            let base = (32.0 * sigma * sigma / (epsilon * epsilon)).max(1.0);
            let want = (base * (2.0 / p_call).ln()).ceil().max(1.0) as usize;
            sample_without_replacement(n, want, rng)
        }
        VerifyMode::OnlineMedianOfMeans => {
            return Err(Error::param(
                "mu1",
                "median-of-means verification does not take a mu override",
            ));
        }
    };
    let estimate = coord_grad_central(problem, &batch, x, mu, Phase::Verify)?;
    let observed_norm = estimate.g.norm();
    let threshold = 0.75 * epsilon;
    let queries_spent = estimate.queries_spent;
    Ok(VerifyOutcome {
        verdict: classify_norm(observed_norm, threshold),
        estimate,
        observed_norm,
        threshold,
        queries_spent,
    })
}

//! Zeroth-order derivative estimators.
//!
//! Every estimator is a fixed arithmetic expression over metered function
//! evaluations with an exact advertised query cost:
//!
//! * coordinate central differences, 2 d |batch| queries, error
//!   <= sqrt(d) rho mu^2 / 6 against the batch-mean gradient;
//! * coordinate forward differences, (d + 1) |batch| queries, error
//!   <= ell sqrt(d) mu;
//! * random-direction central differences, 2 |batch| queries, unbiased for
//!   the ball-smoothed gradient;
//! * a Hessian-vector product estimator, 4 d queries (2 d when the base-point
//!   stencil is cached), error <= rho (||v||^2 / 2 + sqrt(d) mu^2 / 3), exact
//!   on quadratics;
//! * a gradient-norm verifier returning Large/Small with certified margins.
//!
//! Summation order is fixed, so a result is a deterministic function of the
//! problem, the arguments, and the rng stream.

use crate::error::{require_positive, require_probability, Error, Result};
use crate::oracle::{BlackBoxProblem, Phase};
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradVariant {
    CoordCentral,
    CoordForward,
    RandCentral,
}

/// A gradient estimate together with everything needed to audit it.
#[derive(Debug, Clone)]
pub struct GradEstimate {
    pub g: DVector<f64>,
    pub variant: GradVariant,
    pub mu: f64,
    /// Exact number of component evaluations spent.
    pub queries_spent: u64,
    /// Component multiset the estimate averaged over.
    pub batch: Vec<usize>,
}

/// A Hessian-vector product estimate at a fixed base point.
#[derive(Debug, Clone)]
pub struct HvEstimate {
    pub hv: DVector<f64>,
    pub mu: f64,
    pub x0: DVector<f64>,
    pub v: DVector<f64>,
    pub queries_spent: u64,
}

fn check_batch(problem: &BlackBoxProblem, batch: &[usize]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::param("batch", "must be nonempty"));
    }
    let n = problem.n_components();
    if let Some(&bad) = batch.iter().find(|&&i| i >= n) {
        return Err(Error::param("batch", format!("component {bad} out of range (n = {n})")));
    }
    Ok(())
}

/// Central-difference coordinate-wise gradient estimator:
/// g_j = [f_S(x + mu e_j) - f_S(x - mu e_j)] / (2 mu). Costs 2 d |batch|.
pub fn coord_grad_central(
    problem: &BlackBoxProblem,
    batch: &[usize],
    x: &DVector<f64>,
    mu: f64,
    phase: Phase,
) -> Result<GradEstimate> {
    require_positive("mu", mu)?;
    check_batch(problem, batch)?;
    let d = problem.dim();
    let mut g = DVector::zeros(d);
    let mut point = x.clone();
    for j in 0..d {
        point[j] = x[j] + mu;
        let fp = problem.eval_batch_mean(batch, &point, phase);
        point[j] = x[j] - mu;
        let fm = problem.eval_batch_mean(batch, &point, phase);
        point[j] = x[j];
        g[j] = (fp - fm) / (2.0 * mu);
    }
    Ok(GradEstimate {
        g,
        variant: GradVariant::CoordCentral,
        mu,
        queries_spent: 2 * d as u64 * batch.len() as u64,
        batch: batch.to_vec(),
    })
}

/// Forward-difference coordinate-wise gradient estimator:
/// g_j = [f_S(x + mu e_j) - f_S(x)] / mu. Costs (d + 1) |batch|.
pub fn coord_grad_forward(
    problem: &BlackBoxProblem,
    batch: &[usize],
    x: &DVector<f64>,
    mu: f64,
    phase: Phase,
) -> Result<GradEstimate> {
    require_positive("mu", mu)?;
    check_batch(problem, batch)?;
    let d = problem.dim();
    let base = problem.eval_batch_mean(batch, x, phase);
    let mut g = DVector::zeros(d);
    let mut point = x.clone();
    for j in 0..d {
        point[j] = x[j] + mu;
        let fp = problem.eval_batch_mean(batch, &point, phase);
        point[j] = x[j];
        g[j] = (fp - base) / mu;
    }
    Ok(GradEstimate {
        g,
        variant: GradVariant::CoordForward,
        mu,
        queries_spent: (d as u64 + 1) * batch.len() as u64,
        batch: batch.to_vec(),
    })
}

/// Uniform draw from the unit sphere via a normalized standard Gaussian.
pub fn sample_unit_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let u = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = u.norm();
        if norm > 0.0 {
            return u / norm;
        }
    }
}

/// Random-direction central-difference gradient estimator with a fresh
/// uniform sphere direction. Costs 2 |batch|.
pub fn rand_grad_central<R: Rng + ?Sized>(
    problem: &BlackBoxProblem,
    batch: &[usize],
    x: &DVector<f64>,
    mu: f64,
    phase: Phase,
    rng: &mut R,
) -> Result<GradEstimate> {
    let u = sample_unit_sphere(problem.dim(), rng);
    rand_grad_central_with_direction(problem, batch, x, mu, &u, phase)
}

/// Random-direction estimator with a caller-supplied unit direction:
/// g = d [f_S(x + mu u) - f_S(x - mu u)] / (2 mu) u. Lets variance-reduced
/// callers reuse one direction across two base points.
pub fn rand_grad_central_with_direction(
    problem: &BlackBoxProblem,
    batch: &[usize],
    x: &DVector<f64>,
    mu: f64,
    u: &DVector<f64>,
    phase: Phase,
) -> Result<GradEstimate> {
    require_positive("mu", mu)?;
    check_batch(problem, batch)?;
    let d = problem.dim();
    let fp = problem.eval_batch_mean(batch, &(x + mu * u), phase);
    let fm = problem.eval_batch_mean(batch, &(x - mu * u), phase);
    let scale = d as f64 * (fp - fm) / (2.0 * mu);
    Ok(GradEstimate {
        g: scale * u,
        variant: GradVariant::RandCentral,
        mu,
        queries_spent: 2 * batch.len() as u64,
        batch: batch.to_vec(),
    })
}

/// Hessian-vector product estimator on component i:
/// (Hv)_j = [f_i(x0+v+mu e_j) - f_i(x0+v-mu e_j) + f_i(x0-mu e_j) - f_i(x0+mu e_j)] / (2 mu).
/// Costs 4 d queries.
pub fn hv_estimate(
    problem: &BlackBoxProblem,
    i: usize,
    x0: &DVector<f64>,
    v: &DVector<f64>,
    mu: f64,
    phase: Phase,
) -> Result<HvEstimate> {
    require_positive("mu", mu)?;
    let d = problem.dim();
    let shifted = x0 + v;
    let mut hv = DVector::zeros(d);
    let mut a = shifted.clone();
    let mut b = x0.clone();
    for j in 0..d {
        a[j] = shifted[j] + mu;
        let f_sp = problem.eval(i, &a, phase);
        a[j] = shifted[j] - mu;
        let f_sm = problem.eval(i, &a, phase);
        a[j] = shifted[j];
        b[j] = x0[j] - mu;
        let f_bm = problem.eval(i, &b, phase);
        b[j] = x0[j] + mu;
        let f_bp = problem.eval(i, &b, phase);
        b[j] = x0[j];
        hv[j] = (f_sp - f_sm + f_bm - f_bp) / (2.0 * mu);
    }
    Ok(HvEstimate { hv, mu, x0: x0.clone(), v: v.clone(), queries_spent: 4 * d as u64 })
}

/// Base-point stencil {f_i(x0 +- mu e_j)} reusable across displacements v as
/// long as (component, x0, mu) stay fixed. Building it costs 2 d queries.
#[derive(Debug, Clone)]
pub struct HvBaseCache {
    component: usize,
    x0: DVector<f64>,
    mu: f64,
    plus: Vec<f64>,
    minus: Vec<f64>,
}

impl HvBaseCache {
    pub fn new(
        problem: &BlackBoxProblem,
        i: usize,
        x0: &DVector<f64>,
        mu: f64,
        phase: Phase,
    ) -> Result<Self> {
        require_positive("mu", mu)?;
        let d = problem.dim();
        let mut plus = vec![0.0; d];
        let mut minus = vec![0.0; d];
        let mut b = x0.clone();
        for j in 0..d {
            b[j] = x0[j] + mu;
            plus[j] = problem.eval(i, &b, phase);
            b[j] = x0[j] - mu;
            minus[j] = problem.eval(i, &b, phase);
            b[j] = x0[j];
        }
        Ok(Self { component: i, x0: x0.clone(), mu, plus, minus })
    }
}

/// Cached-stencil variant of [`hv_estimate`]; costs 2 d queries and returns a
/// bitwise-identical result to the fresh computation.
pub fn hv_estimate_cached(
    problem: &BlackBoxProblem,
    v: &DVector<f64>,
    cache: &HvBaseCache,
    phase: Phase,
) -> Result<HvEstimate> {
    let d = problem.dim();
    let mu = cache.mu;
    let x0 = &cache.x0;
    let shifted = x0 + v;
    let mut hv = DVector::zeros(d);
    let mut a = shifted.clone();
    for j in 0..d {
        a[j] = shifted[j] + mu;
        let f_sp = problem.eval(cache.component, &a, phase);
        a[j] = shifted[j] - mu;
        let f_sm = problem.eval(cache.component, &a, phase);
        a[j] = shifted[j];
        hv[j] = (f_sp - f_sm + cache.minus[j] - cache.plus[j]) / (2.0 * mu);
    }
    Ok(HvEstimate { hv, mu, x0: x0.clone(), v: v.clone(), queries_spent: 2 * d as u64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyMode {
    /// Full-component sweep; the certified answer for deterministic problems.
    Deterministic,
    /// One sampled batch sized for the per-call failure budget p.
    Online,
    /// Median of per-group norm estimates; the proof-device construction,
    /// kept behind this flag.
    OnlineMedianOfMeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Certifies ||grad f(x)|| >= eps / 2.
    Large,
    /// Certifies ||grad f(x)|| <= eps (with probability 1 - p online).
    Small,
}

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub verdict: Verdict,
    /// The gradient estimate that decided the verdict; descent steps reuse it
    /// so its cost is paid once.
    pub estimate: GradEstimate,
    /// Decision value ||g_hat|| (the median group norm in median-of-means).
    pub observed_norm: f64,
    /// Large iff observed_norm >= threshold = 3 eps / 4.
    pub threshold: f64,
    pub queries_spent: u64,
}

/// Sorted without-replacement sample of min(want, n) component indices.
fn sample_batch<R: Rng + ?Sized>(n: usize, want: usize, rng: &mut R) -> Vec<usize> {
    if want >= n {
        return (0..n).collect();
    }
    let mut idx = rand::seq::index::sample(rng, n, want).into_vec();
    idx.sort_unstable();
    idx
}

/// Tests whether the gradient norm at x is Large (>= eps/2) or Small (<= eps).
///
/// Deterministic mode sweeps every component with
/// mu = sqrt(3 eps / (2 rho sqrt(d))) and is exact up to the coordinate
/// estimator bound. Online mode samples a batch of
/// ceil(max(32 sigma^2/eps^2, 1) ln(2/p)) components (capped at n) with
/// mu = sqrt(3 eps / (4 rho sqrt(d))); p is this call's failure budget, so
/// callers invoking it K times split their total budget as p_total/K.
/// Median-of-means draws 2 ceil(log2(1/p)) + 1 groups of
/// max(128 sigma^2/eps^2, 1) components and decides on the median group norm.
///
/// The boundary ||g_hat|| exactly at 3 eps / 4 classifies as Large:
/// conservative, since Large only triggers more descent while a false Small
/// would certify a non-stationary point.
pub fn verify_gradient_norm<R: Rng + ?Sized>(
    problem: &BlackBoxProblem,
    x: &DVector<f64>,
    epsilon: f64,
    p: f64,
    mode: VerifyMode,
    rng: &mut R,
) -> Result<VerifyOutcome> {
    require_positive("epsilon", epsilon)?;
    let d = problem.dim() as f64;
    let n = problem.n_components();
    let rho = problem.profile().rho_derivation();
    let sigma = problem.profile().sigma;
    let threshold = 0.75 * epsilon;

    match mode {
        VerifyMode::Deterministic => {
            let mu = (3.0 * epsilon / (2.0 * rho * d.sqrt())).sqrt();
            let batch: Vec<usize> = (0..n).collect();
            let estimate = coord_grad_central(problem, &batch, x, mu, Phase::Verify)?;
            finish_simple(estimate, threshold)
        }
        VerifyMode::Online => {
            require_probability("p", p)?;
            let mu = (3.0 * epsilon / (4.0 * rho * d.sqrt())).sqrt();
            let want = ((32.0 * sigma * sigma / (epsilon * epsilon)).max(1.0)
                * (2.0 / p).ln())
            .ceil() as usize;
            let batch = sample_batch(n, want.max(1), rng);
            let estimate = coord_grad_central(problem, &batch, x, mu, Phase::Verify)?;
            finish_simple(estimate, threshold)
        }
        VerifyMode::OnlineMedianOfMeans => {
            require_probability("p", p)?;
            let mu = (3.0 * epsilon / (4.0 * rho * d.sqrt())).sqrt();
            let group = (128.0 * sigma * sigma / (epsilon * epsilon)).max(1.0).ceil() as usize;
            let m = 2 * (1.0 / p).log2().ceil() as usize + 1;
            let mut estimates = Vec::with_capacity(m);
            let mut total = 0u64;
            for _ in 0..m {
                let batch = sample_batch(n, group, rng);
                let est = coord_grad_central(problem, &batch, x, mu, Phase::Verify)?;
                total += est.queries_spent;
                estimates.push(est);
            }
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| {
                estimates[a].g.norm().partial_cmp(&estimates[b].g.norm()).unwrap()
            });
            let median = order[m / 2];
            let estimate = estimates.swap_remove(median);
            let observed_norm = estimate.g.norm();
            let verdict = if observed_norm >= threshold { Verdict::Large } else { Verdict::Small };
            Ok(VerifyOutcome { verdict, estimate, observed_norm, threshold, queries_spent: total })
        }
    }
}

/// The verifier's decision rule; the boundary itself classifies as Large.
pub fn classify_norm(observed: f64, threshold: f64) -> Verdict {
    if observed >= threshold {
        Verdict::Large
    } else {
        Verdict::Small
    }
}

fn finish_simple(estimate: GradEstimate, threshold: f64) -> Result<VerifyOutcome> {
    let observed_norm = estimate.g.norm();
    let verdict = classify_norm(observed_norm, threshold);
    let queries_spent = estimate.queries_spent;
    Ok(VerifyOutcome { verdict, estimate, observed_norm, threshold, queries_spent })
}

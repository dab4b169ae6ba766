//! Parallel experiment execution. Every (algorithm, seed) pair owns a fresh
//! problem instance (independent ledger) and an independent ChaCha8 stream
//! seeded by the pair's seed, so runs are reproducible bit for bit and the
//! pair order never matters. Each pair writes its trajectory CSV atomically;
//! the summary table and overlay plot are assembled after all pairs finish.
//!
//! Solver knobs left unset in the config fall back to the solver's own
//! schedule resolution. Baseline fallbacks are the benchmark-table
//! conventions: ZPSGD eta = 1/(2 ell), noise radius = epsilon, m = d; PAGD
//! eta = 1/(4 ell), r = g_thres = epsilon, f_thres = sqrt(eps^3/rho'),
//! t_thres = ceil(ell/sqrt(rho' eps)); RSPI sigma1 = sigma2 = 1,
//! rho_sigma1 = 0.95, t_sigma1 = t_dfpi = 20.

use crate::config::{AlgorithmSpec, ExperimentConfig};
use crate::{HarnessError, Result};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::Write;
use std::path::{Path, PathBuf};
use zoncf_core::baselines::{pagd_run, rspi_run, zpsgd_run, PagdParams, RspiParams, ZpsgdParams};
use zoncf_core::oracle::BlackBoxProblem;
use zoncf_core::solvers::{
    zo_gd_ncf, zo_scsg_ncf, zo_sgd_ncf, zo_spider_coord, zo_spider_ncf, GradOption, SolverParams,
    SolverReport, Termination,
};
use zoncf_core::spectral;

/// Trajectory file schema. Stable: downstream tooling greps on it.
pub const CSV_HEADER: &str = "seed,algorithm,queries,f,event,ms";
/// Summary file schema. `grad_norm` and `lambda_min` are oracle-side checks,
/// left empty for problems without analytic hooks.
pub const SUMMARY_HEADER: &str = "algorithm,seed,final_f,queries,termination,grad_norm,lambda_min";

/// Dense-sampling interval for filler rows between events.
const SAMPLE_EVERY: u64 = 1000;

/// One finished (algorithm, seed) pair.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub algorithm: String,
    pub seed: u64,
    pub final_f: f64,
    pub queries: u64,
    pub termination: &'static str,
    /// `||grad f(x_star)||` when the problem has an analytic gradient.
    pub grad_norm: Option<f64>,
    /// Smallest Hessian eigenvalue at x_star when analytically available.
    pub lambda_min: Option<f64>,
    pub csv_path: PathBuf,
}

pub fn termination_str(t: Termination) -> &'static str {
    match t {
        Termination::SospCertified => "sosp-certified",
        Termination::IterationCapReached => "iteration-cap",
        Termination::QueryBudgetExhausted => "budget-exhausted",
        Termination::GradConverged => "grad-converged",
    }
}

/// Runs every (algorithm, seed) pair of the config to termination or budget,
/// writing `{algorithm}-seed{seed}.csv` per pair plus `summary.csv` and
/// `plot.svg` under `out_dir`. Returns the outcomes sorted by
/// (algorithm, seed).
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<RunOutcome>> {
    config.validate()?;
    // Surface problem construction failures (missing dataset) before
    // creating any output.
    config.problem.build()?;
    std::fs::create_dir_all(out_dir)?;
    let pairs: Vec<(usize, u64)> = (0..config.algorithms.len())
        .flat_map(|i| config.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let mut outcomes = pairs
        .par_iter()
        .map(|&(alg_idx, seed)| run_pair(config, alg_idx, seed, out_dir))
        .collect::<Result<Vec<RunOutcome>>>()?;
    outcomes.sort_by(|a, b| (a.algorithm.as_str(), a.seed).cmp(&(b.algorithm.as_str(), b.seed)));
    write_summary(&outcomes, &out_dir.join("summary.csv"))?;
    let series = crate::plot::read_trajectories(out_dir)?;
    let style = crate::plot::PlotStyle { title: config.name.clone(), ..Default::default() };
    let svg = crate::plot::emit_plot(&series, &style)?;
    write_atomic(&out_dir.join("plot.svg"), svg.as_bytes())?;
    Ok(outcomes)
}

fn run_pair(
    config: &ExperimentConfig,
    alg_idx: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<RunOutcome> {
    let spec = &config.algorithms[alg_idx];
    let problem = config.problem.build()?;
    let x0 = DVector::zeros(problem.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let report = dispatch(&problem, &x0, config, spec, &mut rng)?;
    let mut text = String::from(CSV_HEADER);
    text.push('\n');
    for row in trajectory_rows(seed, &spec.name, &problem, &x0, &report) {
        text.push_str(&row);
        text.push('\n');
    }
    let csv_path = out_dir.join(format!("{}-seed{}.csv", spec.name, seed));
    write_atomic(&csv_path, text.as_bytes())?;
    let x_star = &report.x_star;
    Ok(RunOutcome {
        algorithm: spec.name.clone(),
        seed,
        final_f: problem.full_value_unmetered(x_star),
        queries: report.queries_spent(),
        termination: termination_str(report.termination),
        grad_norm: problem.analytic_gradient(x_star).map(|g| g.norm()),
        lambda_min: problem.analytic_hessian(x_star).map(|h| spectral::lambda_min(&h)),
        csv_path,
    })
}

/// CSV rows for one report: a queries = 0 anchor, one row per event, and
/// filler rows at every `SAMPLE_EVERY` mark in between. The iterate only
/// moves at events, so a filler's objective value is the previous event's
/// value, exactly the unmetered full-objective evaluation at the current
/// iterate; fillers carry the `oracle` tag and cost nothing.
fn trajectory_rows(
    seed: u64,
    alg: &str,
    problem: &BlackBoxProblem,
    x0: &DVector<f64>,
    report: &SolverReport,
) -> Vec<String> {
    let mut rows = Vec::with_capacity(report.trajectory.len() + 16);
    let f0 = problem.full_value_unmetered(x0);
    rows.push(format!("{seed},{alg},0,{f0},oracle,0"));
    let mut prev_q = 0u64;
    let mut prev_f = f0;
    for rec in &report.trajectory {
        let mut mark = (prev_q / SAMPLE_EVERY + 1) * SAMPLE_EVERY;
        while mark < rec.query_total {
            rows.push(format!("{seed},{alg},{mark},{prev_f},oracle,0"));
            mark += SAMPLE_EVERY;
        }
        rows.push(format!(
            "{seed},{alg},{},{},{},0",
            rec.query_total,
            rec.f_value,
            rec.event.tag()
        ));
        prev_q = rec.query_total;
        prev_f = rec.f_value;
    }
    rows
}

fn dispatch(
    problem: &BlackBoxProblem,
    x0: &DVector<f64>,
    config: &ExperimentConfig,
    spec: &AlgorithmSpec,
    rng: &mut ChaCha8Rng,
) -> Result<SolverReport> {
    match spec.name.as_str() {
        "zo-gd-ncf" => Ok(zo_gd_ncf(problem, x0, &solver_params(config, spec, problem)?, rng)?),
        "zo-sgd-ncf" => Ok(zo_sgd_ncf(problem, x0, &solver_params(config, spec, problem)?, rng)?),
        "zo-scsg-ncf" => {
            Ok(zo_scsg_ncf(problem, x0, &solver_params(config, spec, problem)?, rng)?)
        }
        "zo-spider-ncf" => {
            Ok(zo_spider_ncf(problem, x0, &solver_params(config, spec, problem)?, rng)?)
        }
        "zo-spider-coord" => {
            Ok(zo_spider_coord(problem, x0, &solver_params(config, spec, problem)?, rng)?)
        }
        "zpsgd" => Ok(zpsgd_run(problem, x0, &zpsgd_params(config, spec, problem)?, rng)?),
        "pagd" => Ok(pagd_run(problem, x0, &pagd_params(config, spec, problem)?, rng)?),
        "rspi" => Ok(rspi_run(problem, x0, &rspi_params(config, spec)?, rng)?),
        other => Err(HarnessError::Config(format!("unknown algorithm {other:?}"))),
    }
}

fn solver_params(
    config: &ExperimentConfig,
    spec: &AlgorithmSpec,
    problem: &BlackBoxProblem,
) -> Result<SolverParams> {
    let delta = config.resolved_delta(problem);
    let p = spec.p.unwrap_or(0.01);
    let mut params = match spec.preset.as_deref() {
        None | Some("practical") => SolverParams::practical(config.epsilon, delta, p)?,
        Some("theory") => SolverParams::theory(config.epsilon, delta, p)?,
        Some(other) => return Err(HarnessError::Config(format!("unknown preset {other:?}"))),
    };
    params = params.with_budget(config.query_budget)?;
    if let Some(v) = spec.eta {
        params = params.with_eta(v)?;
    }
    if let Some(v) = spec.k_max {
        params = params.with_k_max(v)?;
    }
    if let Some(v) = spec.option {
        params = params.with_option(if v == 1 { GradOption::I } else { GradOption::II });
    }
    if let Some(v) = spec.mu1 {
        params = params.with_mu1(v)?;
    }
    if let Some(v) = spec.mu2 {
        params = params.with_mu2(v)?;
    }
    if let Some(v) = spec.greedy_nc_sign {
        params = params.with_greedy_nc_sign(v);
    }
    if let Some(v) = spec.s_batch {
        params = params.with_s_batch(v)?;
    }
    if let Some(v) = spec.big_b {
        params = params.with_big_b(v)?;
    }
    if let Some(v) = spec.small_b {
        params = params.with_small_b(v)?;
    }
    if let Some(v) = spec.scsg_c {
        params = params.with_scsg_c(v)?;
    }
    if let Some(v) = spec.s1 {
        params = params.with_s1(v)?;
    }
    if let Some(v) = spec.s2 {
        params = params.with_s2(v)?;
    }
    if let Some(v) = spec.q {
        params = params.with_q(v)?;
    }
    if let Some(v) = spec.n0 {
        params = params.with_n0(v)?;
    }
    if let Some(v) = spec.eps_tilde_factor {
        params = params.with_eps_tilde_factor(v)?;
    }
    if let Some(v) = spec.mini_epoch {
        params = params.with_mini_epoch(v)?;
    }
    if let Some(v) = spec.ncf_kappa {
        params = params.with_ncf_kappa(v)?;
    }
    if let Some(v) = spec.ncf_t_max {
        params = params.with_ncf_t_max(v)?;
    }
    if let Some(v) = spec.ncf_eta {
        params = params.with_ncf_eta(v)?;
    }
    if let Some(v) = spec.ncf_sigma {
        params = params.with_ncf_sigma(v)?;
    }
    if let Some(v) = spec.ncf_r {
        params = params.with_ncf_r(v)?;
    }
    Ok(params)
}

fn zpsgd_params(
    config: &ExperimentConfig,
    spec: &AlgorithmSpec,
    problem: &BlackBoxProblem,
) -> Result<ZpsgdParams> {
    let ell = problem.profile().ell;
    let eta = spec.eta.unwrap_or(1.0 / (2.0 * ell));
    let noise_r = spec.noise_r.unwrap_or(config.epsilon);
    let m = spec.m.unwrap_or(problem.dim());
    let mut params = ZpsgdParams::new(eta, noise_r, m)?;
    if let Some(v) = spec.sigma_g {
        params = params.with_sigma_g(v)?;
    }
    params = params.with_budget(config.query_budget)?;
    if let Some(v) = spec.k_max {
        params = params.with_t_max(v)?;
    }
    Ok(params)
}

fn pagd_params(
    config: &ExperimentConfig,
    spec: &AlgorithmSpec,
    problem: &BlackBoxProblem,
) -> Result<PagdParams> {
    let profile = problem.profile();
    let (ell, rho) = (profile.ell, profile.rho_derivation());
    let eps = config.epsilon;
    let eta = spec.eta.unwrap_or(1.0 / (4.0 * ell));
    let r = spec.r.unwrap_or(eps);
    let g_thres = spec.g_thres.unwrap_or(eps);
    let f_thres = spec.f_thres.unwrap_or((eps.powi(3) / rho).sqrt());
    let t_thres = spec.t_thres.unwrap_or((ell / (rho * eps).sqrt()).ceil() as usize);
    let mut params = PagdParams::new(eta, r, g_thres, f_thres, t_thres)?;
    if let Some(v) = spec.h_low {
        params = params.with_h_low(v)?;
    }
    params = params.with_budget(config.query_budget)?;
    if let Some(v) = spec.k_max {
        params = params.with_t_max(v)?;
    }
    Ok(params)
}

fn rspi_params(config: &ExperimentConfig, spec: &AlgorithmSpec) -> Result<RspiParams> {
    let mut params = RspiParams::new(
        spec.sigma1.unwrap_or(1.0),
        spec.sigma2.unwrap_or(1.0),
        spec.rho_sigma1.unwrap_or(0.95),
        spec.t_sigma1.unwrap_or(20),
        spec.t_dfpi.unwrap_or(20),
    )?;
    if let Some(v) = spec.dfpi_eta {
        params = params.with_dfpi_eta(v)?;
    }
    params = params.with_budget(config.query_budget)?;
    if let Some(v) = spec.k_max {
        params = params.with_k_max(v)?;
    }
    Ok(params)
}

fn write_summary(outcomes: &[RunOutcome], path: &Path) -> Result<()> {
    let mut text = String::from(SUMMARY_HEADER);
    text.push('\n');
    for o in outcomes {
        let grad = o.grad_norm.map(|v| v.to_string()).unwrap_or_default();
        let lam = o.lambda_min.map(|v| v.to_string()).unwrap_or_default();
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            o.algorithm, o.seed, o.final_f, o.queries, o.termination, grad, lam
        ));
    }
    write_atomic(path, text.as_bytes())
}

/// Write-then-rename so concurrent readers never observe a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .ok_or_else(|| HarnessError::Data(format!("no parent directory for {}", path.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| HarnessError::Io(e.error))?;
    Ok(())
}

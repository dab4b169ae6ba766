//! Self-check suites behind `zoncf check`. Each check condenses to one JSON
//! record {suite, test, status, observed, bound}: estimator error bounds on
//! the extremal cubic landscape, NCF success rates against a dense
//! eigen-oracle, solver accounting identities, and baseline behavior. The
//! estimator sweep compares against analytic bounds that the cubic attains
//! with equality, so the pinned pass margin is a 1e-12 absolute floating
//! point allowance on top of the analytic bound.

use crate::{HarnessError, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::str::FromStr;
use zoncf_core::baselines::{dfpi, pagd_run, rspi_run, zpsgd_run, PagdParams, RspiParams, ZpsgdParams};
use zoncf_core::estimators::{
    coord_grad_central, hv_estimate, rand_grad_central_with_direction, sample_unit_sphere,
};
use zoncf_core::ncf::{ncf_deterministic, ncf_online, ncf_online_weak, NcfParams};
use zoncf_core::oracle::{
    diag_quadratic, make_cube_sum, make_octopus, make_quadratic, make_separable_cubic, Phase,
};
use zoncf_core::solvers::{
    negative_curvature_step, sample_epoch_length, zo_gd_ncf, Event, SolverParams,
};
use zoncf_core::spectral::rayleigh;

/// Absolute slack on analytically tight error bounds; five orders below the
/// smallest bound in the sweep (mu = 1e-3, d = 1: 1e-6).
const FP_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct InvariantRecord {
    pub suite: String,
    pub test: String,
    pub status: String,
    pub observed: f64,
    pub bound: f64,
}

impl InvariantRecord {
    /// Pass iff observed <= bound.
    fn upper(suite: &str, test: &str, observed: f64, bound: f64) -> Self {
        InvariantRecord {
            suite: suite.into(),
            test: test.into(),
            status: if observed <= bound { "pass" } else { "fail" }.into(),
            observed,
            bound,
        }
    }

    /// Pass iff observed >= bound.
    fn lower(suite: &str, test: &str, observed: f64, bound: f64) -> Self {
        InvariantRecord {
            suite: suite.into(),
            test: test.into(),
            status: if observed >= bound { "pass" } else { "fail" }.into(),
            observed,
            bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteSelect {
    Estimators,
    Ncf,
    Solvers,
    Baselines,
    All,
}

impl FromStr for SuiteSelect {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "estimators" => Ok(SuiteSelect::Estimators),
            "ncf" => Ok(SuiteSelect::Ncf),
            "solvers" => Ok(SuiteSelect::Solvers),
            "baselines" => Ok(SuiteSelect::Baselines),
            "all" => Ok(SuiteSelect::All),
            other => Err(HarnessError::Config(format!(
                "unknown suite {other:?}; expected estimators, ncf, solvers, baselines, or all"
            ))),
        }
    }
}

pub fn run_invariants(suite: SuiteSelect) -> Result<Vec<InvariantRecord>> {
    let mut records = Vec::new();
    if matches!(suite, SuiteSelect::Estimators | SuiteSelect::All) {
        records.extend(estimator_records(1.0)?);
    }
    if matches!(suite, SuiteSelect::Ncf | SuiteSelect::All) {
        records.extend(ncf_records()?);
    }
    if matches!(suite, SuiteSelect::Solvers | SuiteSelect::All) {
        records.extend(solver_records()?);
    }
    if matches!(suite, SuiteSelect::Baselines | SuiteSelect::All) {
        records.extend(baseline_records()?);
    }
    Ok(records)
}

pub fn all_pass(records: &[InvariantRecord]) -> bool {
    records.iter().all(|r| r.status == "pass")
}

pub fn report_json(records: &[InvariantRecord]) -> Result<String> {
    serde_json::to_string_pretty(records)
        .map_err(|e| HarnessError::Data(format!("invariant report serialization: {e}")))
}

/// Estimator bound sweep on f = sum x_j^3 (rho = 6), where the gradient
/// bound holds with equality in exact arithmetic, plus quadratic exactness.
/// `corruption` scales the smoothing and the Hessian-vector displacement
/// actually used while the bounds keep the nominal values; 1.0 is the real
/// suite, anything larger is a negative control that must fail. (The
/// displacement must be corrupted too: a constant third derivative cancels
/// the mu^2 bias of the Hessian-vector estimate exactly.)
fn estimator_records(corruption: f64) -> Result<Vec<InvariantRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut grad_excess = f64::NEG_INFINITY;
    let mut hv_excess = f64::NEG_INFINITY;
    for d in [1usize, 5, 20, 100] {
        let p = make_cube_sum(d)?;
        for mu in [1e-1, 1e-2, 1e-3] {
            for _ in 0..50 {
                let mut x = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
                let norm = x.norm();
                if norm > 1.0 {
                    x /= norm;
                }
                let truth = p.analytic_gradient(&x).expect("cube sum is analytic");
                let est = coord_grad_central(&p, &[0], &x, mu * corruption, Phase::GradEst)?;
                let bound = (d as f64).sqrt() * mu * mu;
                grad_excess = grad_excess.max((&est.g - &truth).norm() - bound);

                let v = DVector::from_fn(d, |_, _| rng.gen_range(-0.5..0.5));
                let hv = hv_estimate(&p, 0, &x, &(&v * corruption), mu * corruption, Phase::Ncf)?;
                let truth_hv = p.analytic_hessian(&x).expect("cube sum is analytic") * &v;
                let bound_hv =
                    6.0 * (v.norm_squared() / 2.0 + (d as f64).sqrt() * mu * mu / 3.0);
                hv_excess = hv_excess.max((&hv.hv - &truth_hv).norm() - bound_hv);
            }
        }
    }
    let mut quad_worst = 0.0f64;
    for trial in 0..100 {
        let d = 1 + (trial % 8);
        let m = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
        let h = (&m + m.transpose()) * 0.5;
        let b = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
        let p = make_quadratic(h.clone(), b.clone(), None)?;
        let x = DVector::from_fn(d, |_, _| rng.gen_range(-2.0..2.0));
        let truth = &h * &x + &b;
        let est = coord_grad_central(&p, &[0], &x, 0.3, Phase::GradEst)?;
        quad_worst = quad_worst.max((&est.g - &truth).norm());
        // The random estimator is exact along its own direction: d (g . u) u.
        let u = sample_unit_sphere(d, &mut rng);
        let est = rand_grad_central_with_direction(&p, &[0], &x, 0.3, &u, Phase::GradEst)?;
        let expected = &u * (d as f64 * truth.dot(&u));
        quad_worst = quad_worst.max((&est.g - expected).norm());
        let v = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
        let hv = hv_estimate(&p, 0, &x, &v, 0.05, Phase::Ncf)?;
        quad_worst = quad_worst.max((&hv.hv - &h * &v).norm());
    }
    Ok(vec![
        InvariantRecord::upper(
            "estimators",
            "coord central: max ||est - grad|| - sqrt(d) rho mu^2 / 6 over the cubic sweep",
            grad_excess,
            FP_SLACK,
        ),
        InvariantRecord::upper(
            "estimators",
            "Hessian-vector: max ||est - H v|| - rho (||v||^2/2 + sqrt(d) mu^2/3) over the sweep",
            hv_excess,
            FP_SLACK,
        ),
        InvariantRecord::upper(
            "estimators",
            "quadratic exactness of coord central, rand central, and Hessian-vector estimates",
            quad_worst,
            1e-9,
        ),
    ])
}

/// Success rates against the dense eigen-oracle on d = 10 diagonal
/// quadratics, delta = 0.5, p = 0.05.
fn ncf_records() -> Result<Vec<InvariantRecord>> {
    let delta = 0.5;
    let params = NcfParams::practical(delta, 0.05)?;
    let x0 = DVector::zeros(10);
    let neg = diag_quadratic(10, -1.0, 1.0);
    let psd = diag_quadratic(10, 0.2, 1.0);
    let h_neg = neg.analytic_hessian(&x0).expect("quadratic is analytic");

    let seeds = 60u64;
    let mut online_hits = 0usize;
    let mut det_hits = 0usize;
    let mut online_bottom = 0usize;
    let mut det_bottom = 0usize;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Some(v) = ncf_online(&neg, &x0, &params, &mut rng)?.direction() {
            if rayleigh(&h_neg, v) <= -delta / 2.0 {
                online_hits += 1;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Some(v) = ncf_deterministic(&neg, &x0, &params, &mut rng)?.direction() {
            if rayleigh(&h_neg, v) <= -delta / 2.0 {
                det_hits += 1;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if ncf_online(&psd, &x0, &params, &mut rng)?.is_bottom() {
            online_bottom += 1;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if ncf_deterministic(&psd, &x0, &params, &mut rng)?.is_bottom() {
            det_bottom += 1;
        }
    }
    let weak_seeds = 90u64;
    let mut weak_hits = 0usize;
    for seed in 0..weak_seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Some(v) = ncf_online_weak(&neg, &x0, &params, &mut rng)?.direction() {
            if rayleigh(&h_neg, v) <= -delta / 2.0 {
                weak_hits += 1;
            }
        }
    }
    let rate = |hits: usize, n: u64| hits as f64 / n as f64;
    Ok(vec![
        InvariantRecord::lower(
            "ncf",
            "online NCF Rayleigh <= -delta/2 rate (target 1 - p = 0.95, gate 0.90)",
            rate(online_hits, seeds),
            0.90,
        ),
        InvariantRecord::lower(
            "ncf",
            "deterministic NCF Rayleigh <= -delta/2 rate (target 1 - p = 0.95, gate 0.90)",
            rate(det_hits, seeds),
            0.90,
        ),
        InvariantRecord::lower(
            "ncf",
            "online NCF Bottom rate on a PSD instance (target 1 - p = 0.95, gate 0.90)",
            rate(online_bottom, seeds),
            0.90,
        ),
        InvariantRecord::lower(
            "ncf",
            "deterministic NCF Bottom rate on a PSD instance (target 1 - p = 0.95, gate 0.90)",
            rate(det_bottom, seeds),
            0.90,
        ),
        InvariantRecord::lower(
            "ncf",
            "weak NCF success rate over 90 seeds (target 2/3, gate 2/3 - 3 SE = 0.518)",
            rate(weak_hits, weak_seeds),
            0.518,
        ),
    ])
}

fn solver_records() -> Result<Vec<InvariantRecord>> {
    // Geometric epoch length: P(N >= k) = theta^k gives E[N] = B/b.
    let (big_b, small_b) = (128.0, 10.0);
    let theta = big_b / (big_b + small_b);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let draws = 10_000usize;
    let mut total = 0u64;
    for _ in 0..draws {
        total += sample_epoch_length(theta, &mut rng)? as u64;
    }
    let mean = total as f64 / draws as f64;
    let epoch_dev = (mean * small_b / big_b - 1.0).abs();

    // Random-sign NC step on f = -x^2/2 + x^3/6 at the origin with
    // delta = rho = 1: decrease is 1/3 or 2/3 per draw vs the 1/12 guarantee.
    let cubic = make_separable_cubic(1, -1.0, 1.0, 10.0)?;
    let x = DVector::zeros(1);
    let v = DVector::from_element(1, 1.0);
    let f0 = cubic.full_value_unmetered(&x);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let steps = 2_000usize;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..steps {
        let y = negative_curvature_step(&cubic, &x, &v, 1.0, 1.0, &mut rng)?;
        let dec = f0 - cubic.full_value_unmetered(&y);
        sum += dec;
        sum_sq += dec * dec;
    }
    let mean_dec = sum / steps as f64;
    let var = (sum_sq - sum * sum / steps as f64) / (steps as f64 - 1.0);
    let se = (var / steps as f64).sqrt();

    // Per-event ledger identity on a far-start quadratic: verify and descent
    // both cost 2 d |batch|, so 4 capped iterations must spend exactly 16 d.
    let d = 5usize;
    let quad = make_quadratic(DMatrix::identity(d, d), DVector::zeros(d), Some(1.0))?;
    let params = SolverParams::practical(1e-3, 0.1, 0.01)?.with_k_max(4)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let report = zo_gd_ncf(&quad, &DVector::from_element(d, 10.0), &params, &mut rng)?;
    let mut mismatch = 0.0f64;
    let mut prev = 0u64;
    for rec in &report.trajectory {
        let cost = rec.query_total - prev;
        prev = rec.query_total;
        let expected = match &rec.event {
            Event::Verify { batch, .. } | Event::Descent { batch, .. } => {
                2 * d as u64 * *batch as u64
            }
            // A far-start strongly convex quadratic never triggers NCF.
            _ => {
                mismatch += 1.0;
                cost
            }
        };
        mismatch += (cost as f64 - expected as f64).abs();
    }
    mismatch += (report.queries_spent() as f64 - 16.0 * d as f64).abs();

    // Budget overdraft is at most one iteration (verify + descent = 4 d).
    let params = SolverParams::practical(1e-3, 0.1, 0.01)?.with_budget(50)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let report = zo_gd_ncf(&quad, &DVector::from_element(d, 10.0), &params, &mut rng)?;
    let overdraft = report.queries_spent().saturating_sub(50);

    Ok(vec![
        InvariantRecord::upper(
            "solvers",
            "SCSG epoch length: |E[N] b / B - 1| over 1e4 draws (B = 128, b = 10)",
            epoch_dev,
            0.05,
        ),
        InvariantRecord::lower(
            "solvers",
            "mean NC-step decrease >= delta^3/(12 rho^2) - 3 SE over 2000 draws",
            mean_dec,
            1.0 / 12.0 - 3.0 * se,
        ),
        InvariantRecord::upper(
            "solvers",
            "ZO-GD-NCF ledger: per-event cost 2 d |batch| and total 16 d, summed |mismatch|",
            mismatch,
            0.0,
        ),
        InvariantRecord::upper(
            "solvers",
            "budget overdraft bounded by one iteration (4 d = 20 queries)",
            overdraft as f64,
            4.0 * d as f64,
        ),
    ])
}

fn baseline_records() -> Result<Vec<InvariantRecord>> {
    // RSPI keeps a cached incumbent and only accepts strict improvements, so
    // the recorded objective can never rise.
    let tau = std::f64::consts::E;
    let octopus = make_octopus(3, tau, tau, 1.0)?;
    let params = RspiParams::new(1.0, 1.25, 0.95, 20, 5)?.with_budget(20_000)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let report = rspi_run(&octopus, &DVector::zeros(3), &params, &mut rng)?;
    let mut max_rise = 0.0f64;
    for w in report.trajectory.windows(2) {
        max_rise = max_rise.max(w[1].f_value - w[0].f_value);
    }

    // DFPI power iteration aligns with the most negative eigenvector.
    let neg = diag_quadratic(10, -1.0, 0.5);
    let dfpi_params = RspiParams::new(1.0, 1.0, 0.95, 20, 100)?;
    let mut min_align = f64::INFINITY;
    for seed in 0..12u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = dfpi(&neg, &DVector::zeros(10), &dfpi_params, &mut rng)?;
        min_align = min_align.min(s[0].abs());
    }

    // ZPSGD ledger: (m + 1) n per iteration; 7 iterations at m = 5, n = 1.
    let quad = make_quadratic(DMatrix::identity(3, 3), DVector::zeros(3), Some(1.0))?;
    let zp = ZpsgdParams::new(0.1, 0.01, 5)?.with_t_max(7)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let report = zpsgd_run(&quad, &DVector::from_element(3, 1.0), &zp, &mut rng)?;
    let zpsgd_mismatch = (report.queries_spent() as f64 - 42.0).abs();

    // ZPSGD pre-checks each step, so a budget is never overdrawn at all:
    // 3 steps of cost 4 fit in 13, a 4th would overdraw.
    let quad2 = make_quadratic(DMatrix::identity(2, 2), DVector::zeros(2), Some(1.0))?;
    let zp = ZpsgdParams::new(0.1, 0.01, 3)?.with_budget(13)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let report = zpsgd_run(&quad2, &DVector::from_element(2, 1.0), &zp, &mut rng)?;
    let zpsgd_overdraft = report.queries_spent().saturating_sub(13);

    // PAGD pure descent: d + 1 queries per gated step, 5 capped steps on d = 3.
    let pagd = PagdParams::new(0.1, 0.01, 0.1, 1e-6, 3)?.with_t_max(5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let report = pagd_run(&quad, &DVector::from_element(3, 10.0), &pagd, &mut rng)?;
    let pagd_mismatch = (report.queries_spent() as f64 - 20.0).abs();

    // RSPI ledger: initial full value n, then 4 n + 4 d n t_dfpi per pass:
    // 1 + 4 (4 + 24) = 113 on d = 3, n = 1, t_dfpi = 2.
    let rspi = RspiParams::new(0.5, 0.5, 0.95, 10, 2)?.with_k_max(4)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let report = rspi_run(&quad, &DVector::from_element(3, 2.0), &rspi, &mut rng)?;
    let rspi_mismatch = (report.queries_spent() as f64 - 113.0).abs();

    Ok(vec![
        InvariantRecord::upper(
            "baselines",
            "RSPI trajectory is monotone: max objective rise between records",
            max_rise,
            0.0,
        ),
        InvariantRecord::lower(
            "baselines",
            "DFPI alignment |s . e_min| after 100 iterations, min over 12 seeds",
            min_align,
            0.99,
        ),
        InvariantRecord::upper(
            "baselines",
            "ZPSGD ledger: (m + 1) n per iteration, |total - 42|",
            zpsgd_mismatch,
            0.0,
        ),
        InvariantRecord::upper(
            "baselines",
            "ZPSGD budget is never overdrawn (pre-checked steps)",
            zpsgd_overdraft as f64,
            0.0,
        ),
        InvariantRecord::upper(
            "baselines",
            "PAGD pure-descent ledger: (d + 1) per step, |total - 20|",
            pagd_mismatch,
            0.0,
        ),
        InvariantRecord::upper(
            "baselines",
            "RSPI ledger: n + passes (4 n + 4 d n t_dfpi), |total - 113|",
            rspi_mismatch,
            0.0,
        ),
    ])
}

//! Cubic-regularized quadratic: f(w) = 1/2 w^T A w + b^T w + alpha/3 ||w||^3.
//!
//! The deterministic benchmark instance draws a diagonal A with a fixed 10%
//! of entries at -1 and the rest uniform in [1, 2], b = 0. The stochastic
//! variant perturbs A's diagonal and b per component; the draws are centered
//! so the component mean reproduces the deterministic objective exactly, not
//! just in expectation.

use super::{BlackBoxProblem, Objective, SmoothnessProfile};
use crate::error::{require_nonnegative, Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

pub struct CubicRegProblem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    alpha: f64,
    /// Per-component diagonal perturbations; empty for the deterministic instance.
    diag_noise: Vec<DVector<f64>>,
    /// Per-component linear perturbations, parallel to diag_noise.
    lin_noise: Vec<DVector<f64>>,
}

impl CubicRegProblem {
    fn value_with(&self, i: usize, w: &DVector<f64>) -> f64 {
        let mut quad = 0.5 * (&self.a * w).dot(w) + self.b.dot(w);
        if !self.diag_noise.is_empty() {
            let xi = &self.diag_noise[i];
            let xi_lin = &self.lin_noise[i];
            for j in 0..w.len() {
                quad += 0.5 * xi[j] * w[j] * w[j] + xi_lin[j] * w[j];
            }
        }
        quad + self.alpha / 3.0 * w.norm().powi(3)
    }
}

impl Objective for CubicRegProblem {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn n_components(&self) -> usize {
        self.diag_noise.len().max(1)
    }

    fn component(&self, i: usize, w: &DVector<f64>) -> f64 {
        self.value_with(i, w)
    }

    fn analytic_gradient(&self, w: &DVector<f64>) -> Option<DVector<f64>> {
        // centered noise sums to zero, so the mean gradient is the clean one
        Some(&self.a * w + &self.b + self.alpha * w.norm() * w)
    }

    fn analytic_hessian(&self, w: &DVector<f64>) -> Option<DMatrix<f64>> {
        let d = self.dim();
        let norm = w.norm();
        let mut h = self.a.clone();
        if norm > 0.0 {
            for r in 0..d {
                for c in 0..d {
                    h[(r, c)] += self.alpha * w[r] * w[c] / norm;
                }
                h[(r, r)] += self.alpha * norm;
            }
        }
        Some(h)
    }

    fn name(&self) -> &'static str {
        "cubic-reg"
    }
}

/// Deterministic cubic-regularized problem from explicit A, b.
pub fn make_cubic_reg(a: DMatrix<f64>, b: DVector<f64>, alpha: f64) -> Result<BlackBoxProblem> {
    require_nonnegative("alpha", alpha)?;
    if a.nrows() != a.ncols() {
        return Err(Error::param("a", "matrix must be square"));
    }
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: b.len() });
    }
    let asym = (&a - a.transpose()).norm();
    if asym > 1e-12 * (1.0 + a.norm()) {
        return Err(Error::param("a", "matrix must be symmetric"));
    }
    let profile = benchmark_profile(0.0);
    BlackBoxProblem::new(Arc::new(CubicRegProblem { a, b, alpha, diag_noise: vec![], lin_noise: vec![] }), profile)
}

/// ell = 100, rho = 1 is the convention of the benchmark tables for this family.
fn benchmark_profile(sigma: f64) -> SmoothnessProfile {
    SmoothnessProfile::new(100.0, 1.0, sigma).expect("static profile")
}

/// The benchmark diagonal: first ceil(d/10) entries -1, the rest U[1, 2].
fn benchmark_diagonal(d: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let negatives = d.div_ceil(10);
    DVector::from_fn(d, |j, _| if j < negatives { -1.0 } else { rng.gen_range(1.0..2.0) })
}

/// Deterministic benchmark instance on the standard diagonal family.
pub fn cubic_reg_instance(d: usize, seed: u64, alpha: f64) -> Result<BlackBoxProblem> {
    if d == 0 {
        return Err(Error::param("d", "dimension must be >= 1"));
    }
    let a = DMatrix::from_diagonal(&benchmark_diagonal(d, seed));
    make_cubic_reg(a, DVector::zeros(d), alpha)
}

/// Stochastic finite-sum variant: n components, each perturbing the diagonal
/// by centered U[-0.1, 0.1] draws and the linear term by centered U[-1, 1]
/// draws. Centering makes (1/n) sum_i f_i equal the deterministic instance
/// identically in w.
pub fn sample_cubic_reg_stochastic(d: usize, seed: u64, alpha: f64, n: usize) -> Result<BlackBoxProblem> {
    if d == 0 {
        return Err(Error::param("d", "dimension must be >= 1"));
    }
    if n < 2 {
        return Err(Error::param("n", "stochastic variant needs n >= 2 components"));
    }
    let a = DMatrix::from_diagonal(&benchmark_diagonal(d, seed));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut diag_noise: Vec<DVector<f64>> =
        (0..n).map(|_| DVector::from_fn(d, |_, _| rng.gen_range(-0.1..0.1))).collect();
    let mut lin_noise: Vec<DVector<f64>> =
        (0..n).map(|_| DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0))).collect();
    center(&mut diag_noise);
    center(&mut lin_noise);

    let sigma = empirical_sigma(&diag_noise, &lin_noise);
    let profile = benchmark_profile(sigma);
    BlackBoxProblem::new(Arc::new(CubicRegProblem { a, b: DVector::zeros(d), alpha, diag_noise, lin_noise }), profile)
}

fn center(draws: &mut [DVector<f64>]) {
    let n = draws.len() as f64;
    let mut mean = DVector::zeros(draws[0].len());
    for v in draws.iter() {
        mean += v;
    }
    mean /= n;
    for v in draws.iter_mut() {
        *v -= &mean;
    }
}

/// Std-dev bound for component gradients over the benchmark region ||w|| <= 5:
/// grad deviation of component i is diag(xi_i) w + xi_lin_i.
fn empirical_sigma(diag_noise: &[DVector<f64>], lin_noise: &[DVector<f64>]) -> f64 {
    let n = diag_noise.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let dev_sq = 25.0 * diag_noise[i].norm_squared() + lin_noise[i].norm_squared();
        worst = worst.max(dev_sq);
    }
    worst.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Phase;
    use crate::spectral::lambda_min;

    #[test]
    fn hand_computed_values() {
        // A = diag(1, -1), b = 0, alpha = 0.5
        let a = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, -1.0]));
        let p = make_cubic_reg(a, DVector::zeros(2), 0.5).unwrap();
        // w = (1, 0): f = 1/2 + (0.5/3) * 1 = 2/3
        let w = DVector::from_column_slice(&[1.0, 0.0]);
        let f = p.eval(0, &w, Phase::Other);
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
        // w = 0: f = 0, gradient = 0
        let zero = DVector::zeros(2);
        assert_eq!(p.eval(0, &zero, Phase::Other), 0.0);
        assert_eq!(p.analytic_gradient(&zero).unwrap().norm(), 0.0);
        // gradient at w = (1, 0): A w + alpha ||w|| w = (1 + 0.5, 0)
        let g = p.analytic_gradient(&w).unwrap();
        assert!((g[0] - 1.5).abs() < 1e-15);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let p = cubic_reg_instance(6, 3, 0.5).unwrap();
        let w = DVector::from_column_slice(&[0.4, -1.2, 0.3, 0.9, -0.5, 0.1]);
        let h = 1e-6;
        let g = p.analytic_gradient(&w).unwrap();
        for j in 0..6 {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[j] += h;
            wm[j] -= h;
            let fd = (p.full_value_unmetered(&wp) - p.full_value_unmetered(&wm)) / (2.0 * h);
            assert!((g[j] - fd).abs() < 1e-6, "coord {j}: {} vs {}", g[j], fd);
        }
        let hess = p.analytic_hessian(&w).unwrap();
        for j in 0..6 {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[j] += h;
            wm[j] -= h;
            let col = (p.analytic_gradient(&wp).unwrap() - p.analytic_gradient(&wm).unwrap()) / (2.0 * h);
            assert!((hess.column(j) - col).norm() < 1e-5);
        }
    }

    #[test]
    fn benchmark_diagonal_shape() {
        let p = cubic_reg_instance(100, 0, 0.5).unwrap();
        let h = p.analytic_hessian(&DVector::zeros(100)).unwrap();
        let negatives = (0..100).filter(|&j| h[(j, j)] == -1.0).count();
        assert_eq!(negatives, 10);
        for j in 10..100 {
            assert!(h[(j, j)] >= 1.0 && h[(j, j)] <= 2.0);
        }
        // origin is a strict saddle of the deterministic instance
        assert!((lambda_min(&h) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn stochastic_mean_matches_deterministic_exactly() {
        let d = 8;
        let det = cubic_reg_instance(d, 7, 0.5).unwrap();
        let sto = sample_cubic_reg_stochastic(d, 7, 0.5, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let w = DVector::from_fn(d, |_, _| rng.gen_range(-2.0..2.0));
            let mean = sto.full_value_unmetered(&w);
            let clean = det.full_value_unmetered(&w);
            assert!((mean - clean).abs() < 1e-10, "{mean} vs {clean}");
        }
    }

    #[test]
    fn component_gradient_variance_within_declared_sigma() {
        let d = 10;
        let sto = sample_cubic_reg_stochastic(d, 5, 0.5, 64).unwrap();
        let sigma = sto.profile().sigma;
        assert!(sigma > 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = 1e-5;
        for _ in 0..5 {
            let w = DVector::from_fn(d, |_, _| rng.gen_range(-2.0..2.0));
            let g_full = sto.analytic_gradient(&w).unwrap();
            let mut mean_dev_sq = 0.0;
            for i in 0..sto.n_components() {
                // component gradient by central differences on the component
                let mut gi = DVector::zeros(d);
                for j in 0..d {
                    let mut wp = w.clone();
                    let mut wm = w.clone();
                    wp[j] += h;
                    wm[j] -= h;
                    gi[j] = (sto.component_unmetered(i, &wp) - sto.component_unmetered(i, &wm)) / (2.0 * h);
                }
                mean_dev_sq += (gi - &g_full).norm_squared();
            }
            mean_dev_sq /= sto.n_components() as f64;
            assert!(
                mean_dev_sq.sqrt() <= sigma * (1.0 + 1e-6),
                "observed {} > declared sigma {}",
                mean_dev_sq.sqrt(),
                sigma
            );
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_cubic_reg(DMatrix::zeros(2, 3), DVector::zeros(2), 0.5).is_err());
        assert!(make_cubic_reg(DMatrix::zeros(2, 2), DVector::zeros(3), 0.5).is_err());
        assert!(cubic_reg_instance(0, 0, 0.5).is_err());
        assert!(sample_cubic_reg_stochastic(4, 0, 0.5, 1).is_err());
    }
}

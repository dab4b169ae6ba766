//! Regularized nonlinear least squares on a sparse classification dataset:
//! f_i(w) = (y_i - sigmoid(w^T x_i))^2 + sum_j lambda w_j^2 / (1 + alpha w_j^2).
//!
//! The nonconvex regularizer is replicated inside every component so that a
//! single-component query sees the full regularized objective and each f_i
//! stays smooth on its own; the component mean still equals the usual
//! "data fit + one regularizer" form.

use super::{BlackBoxProblem, LibsvmDataset, Objective, SmoothnessProfile};
use crate::error::{require_nonnegative, Error, Result};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Numerically stable logistic sigmoid.
fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug)]
pub struct RegNls {
    data: LibsvmDataset,
    lambda: f64,
    alpha: f64,
}

impl RegNls {
    fn regularizer(&self, w: &DVector<f64>) -> f64 {
        w.iter()
            .map(|&wj| self.lambda * wj * wj / (1.0 + self.alpha * wj * wj))
            .sum()
    }

    /// d/dw_j of the regularizer: 2 lambda w_j / (1 + alpha w_j^2)^2.
    fn regularizer_grad(&self, wj: f64) -> f64 {
        let q = 1.0 + self.alpha * wj * wj;
        2.0 * self.lambda * wj / (q * q)
    }

    /// d^2/dw_j^2 of the regularizer: 2 lambda (1 - 3 alpha w_j^2) / (1 + alpha w_j^2)^3.
    fn regularizer_hess(&self, wj: f64) -> f64 {
        let q = 1.0 + self.alpha * wj * wj;
        2.0 * self.lambda * (1.0 - 3.0 * self.alpha * wj * wj) / (q * q * q)
    }
}

impl Objective for RegNls {
    fn dim(&self) -> usize {
        self.data.n_features()
    }

    fn n_components(&self) -> usize {
        self.data.n_rows()
    }

    fn component(&self, i: usize, w: &DVector<f64>) -> f64 {
        let sig = sigmoid(self.data.sparse_dot(i, w));
        let resid = self.data.label(i) - sig;
        resid * resid + self.regularizer(w)
    }

    fn analytic_gradient(&self, w: &DVector<f64>) -> Option<DVector<f64>> {
        let n = self.data.n_rows();
        let mut g = DVector::zeros(self.dim());
        for i in 0..n {
            let sig = sigmoid(self.data.sparse_dot(i, w));
            // d/dw (y - sig)^2 = -2 (y - sig) sig (1 - sig) x_i
            let coeff = -2.0 * (self.data.label(i) - sig) * sig * (1.0 - sig) / n as f64;
            for &(j, v) in self.data.row(i) {
                g[j] += coeff * v;
            }
        }
        for j in 0..self.dim() {
            g[j] += self.regularizer_grad(w[j]);
        }
        Some(g)
    }

    fn analytic_hessian(&self, w: &DVector<f64>) -> Option<DMatrix<f64>> {
        let n = self.data.n_rows();
        let d = self.dim();
        let mut h = DMatrix::zeros(d, d);
        for i in 0..n {
            let sig = sigmoid(self.data.sparse_dot(i, w));
            let sp = sig * (1.0 - sig);
            let spp = sp * (1.0 - 2.0 * sig);
            // d^2/dw^2 (y - sig)^2 = [2 sig'^2 - 2 (y - sig) sig''] x_i x_i^T
            let c = (2.0 * sp * sp - 2.0 * (self.data.label(i) - sig) * spp) / n as f64;
            for &(j1, v1) in self.data.row(i) {
                for &(j2, v2) in self.data.row(i) {
                    h[(j1, j2)] += c * v1 * v2;
                }
            }
        }
        for j in 0..d {
            h[(j, j)] += self.regularizer_hess(w[j]);
        }
        Some(h)
    }

    fn name(&self) -> &'static str {
        "reg-nls"
    }
}

/// Regularized nonlinear least squares over a parsed dataset.
///
/// Smoothness constants follow the benchmark tuning for this family
/// (ell = 100, rho = 1). The gradient-noise bound is data-derived: each
/// component's data-fit gradient has norm at most
/// 2 sup|y - sig| sup sig' ||x_i|| = 0.5 ||x_i||, the regularizer is common
/// to all components, so deviations from the mean are bounded by the largest
/// row norm.
pub fn make_reg_nls(data: LibsvmDataset, lambda: f64, alpha: f64) -> Result<BlackBoxProblem> {
    require_nonnegative("lambda", lambda)?;
    require_nonnegative("alpha", alpha)?;
    if data.n_rows() == 0 {
        return Err(Error::param("data", "empty dataset"));
    }
    let sigma = if data.n_rows() > 1 { data.max_row_norm() } else { 0.0 };
    let mut profile = SmoothnessProfile::new(100.0, 1.0, sigma)?;
    // f ranges over [0, 1 + d lambda/alpha] when alpha > 0 (the data-fit term
    // is at most 1 and each regularizer coordinate tends to lambda/alpha);
    // with lambda = 0 over [0, 1]. No global bound when alpha = 0, lambda > 0.
    if lambda == 0.0 {
        profile = profile.with_delta_f(1.0);
    } else if alpha > 0.0 {
        profile = profile.with_delta_f(1.0 + data.n_features() as f64 * lambda / alpha);
    }
    BlackBoxProblem::new(Arc::new(RegNls { data, lambda, alpha }), profile)
}

#[cfg(test)]
mod tests {
    use super::super::{parse_libsvm, parse_libsvm_str, Phase};
    use super::*;

    fn toy() -> LibsvmDataset {
        parse_libsvm_str("+1 1:1\n-1 1:2 3:0.5\n+1 2:-1 3:1").unwrap()
    }

    #[test]
    fn value_at_zero_is_quarter() {
        // At w = 0 every sigmoid is 0.5 and the regularizer vanishes, so each
        // component is (y - 0.5)^2 = 0.25 whatever the label.
        let p = make_reg_nls(toy(), 1.0, 1.0).unwrap();
        let zero = DVector::zeros(3);
        for i in 0..3 {
            assert_eq!(p.eval(i, &zero, Phase::Other), 0.25);
        }
        assert_eq!(p.full_value_unmetered(&zero), 0.25);
    }

    #[test]
    fn hand_computed_single_row() {
        // One row "+1 1:1", lambda = alpha = 1, w = (1):
        //   sigmoid(1) = 0.7310585786300049
        //   data fit (1 - sigmoid)^2 = 0.07232948812851325, regularizer 1/2
        //   gradient -2(1-s)s(1-s) + 2w/(1+w^2)^2 = 0.39424581443146656
        //   hessian [2s'^2 - 2(1-s)s''] + 2(1-3)/8 = -0.37381667181081596
        let data = parse_libsvm_str("+1 1:1").unwrap();
        let p = make_reg_nls(data, 1.0, 1.0).unwrap();
        let w = DVector::from_vec(vec![1.0]);
        assert!((p.eval(0, &w, Phase::Other) - 0.5723294881285133).abs() < 1e-15);
        let g = p.analytic_gradient(&w).unwrap();
        assert!((g[0] - 0.39424581443146656).abs() < 1e-15);
        let h = p.analytic_hessian(&w).unwrap();
        assert!((h[(0, 0)] - (-0.37381667181081596)).abs() < 1e-15);
    }

    #[test]
    fn regularizer_identical_across_components() {
        let p = make_reg_nls(toy(), 2.0, 0.5).unwrap();
        let w = DVector::from_vec(vec![0.3, -1.2, 0.7]);
        let reg: f64 = w
            .iter()
            .map(|&wj| 2.0 * wj * wj / (1.0 + 0.5 * wj * wj))
            .sum();
        for i in 0..3 {
            // rows: "1:1", "1:2 3:0.5", "2:-1 3:1"
            let sig = sigmoid(match i {
                0 => 0.3,
                1 => 2.0 * 0.3 + 0.5 * 0.7,
                _ => -1.0 * -1.2 + 1.0 * 0.7,
            });
            let y = if i == 1 { 0.0 } else { 1.0 };
            let expect = (y - sig) * (y - sig) + reg;
            assert!((p.eval(i, &w, Phase::Other) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = make_reg_nls(toy(), 1.0, 1.0).unwrap();
        let w = DVector::from_vec(vec![0.4, -0.9, 1.3]);
        let g = p.analytic_gradient(&w).unwrap();
        let h = 1e-6;
        for j in 0..3 {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[j] += h;
            wm[j] -= h;
            let fd = (p.full_value_unmetered(&wp) - p.full_value_unmetered(&wm)) / (2.0 * h);
            assert!((g[j] - fd).abs() < 1e-8, "coord {j}: {} vs {}", g[j], fd);
        }
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let p = make_reg_nls(toy(), 1.0, 1.0).unwrap();
        let w = DVector::from_vec(vec![0.4, -0.9, 1.3]);
        let hess = p.analytic_hessian(&w).unwrap();
        let h = 1e-5;
        for j in 0..3 {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[j] += h;
            wm[j] -= h;
            let gp = p.analytic_gradient(&wp).unwrap();
            let gm = p.analytic_gradient(&wm).unwrap();
            for k in 0..3 {
                let fd = (gp[k] - gm[k]) / (2.0 * h);
                assert!((hess[(k, j)] - fd).abs() < 1e-6);
            }
        }
        // Symmetry of the analytic form.
        assert!((&hess - hess.transpose()).norm() < 1e-14);
    }

    #[test]
    fn sigma_bounds_component_gradient_deviation() {
        let p = make_reg_nls(toy(), 1.0, 1.0).unwrap();
        let sigma = p.profile().sigma;
        let w = DVector::from_vec(vec![0.2, 0.8, -0.5]);
        let mean = p.analytic_gradient(&w).unwrap();
        let fd = 1e-6;
        for i in 0..3 {
            let mut gi = DVector::zeros(3);
            for j in 0..3 {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[j] += fd;
                wm[j] -= fd;
                gi[j] = (p.component_unmetered(i, &wp) - p.component_unmetered(i, &wm)) / (2.0 * fd);
            }
            assert!((&gi - &mean).norm() <= sigma + 1e-6);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_reg_nls(toy(), -1.0, 1.0).is_err());
        assert!(make_reg_nls(toy(), 1.0, -0.1).is_err());
    }

    #[test]
    fn w1a_value_at_zero_when_available() {
        let Some(path) = crate::oracle::find_data_file("w1a") else {
            eprintln!("w1a dataset not found (set ZONCF_DATA_DIR); skipping");
            return;
        };
        let data = parse_libsvm(path).unwrap();
        let p = make_reg_nls(data, 1.0, 1.0).unwrap();
        assert_eq!(p.n_components(), 2477);
        assert_eq!(p.dim(), 300);
        let zero = DVector::zeros(300);
        assert!((p.full_value_unmetered(&zero) - 0.25).abs() < 1e-12);
    }
}

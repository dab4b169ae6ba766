//! Black-box finite-sum objectives with exact query accounting.
//!
//! A problem is a finite sum f = (1/n) sum_i f_i over components that can only
//! be evaluated pointwise. Every component evaluation costs one ledger unit;
//! algorithms never see derivatives. Problems built from analytic families
//! additionally expose exact gradient/Hessian hooks for tests and report
//! summaries; solver code must not consume them.

mod cubic;
mod ledger;
mod libsvm;
mod octopus;
mod quadratic;
mod regnls;
mod separable;

pub use cubic::{cubic_reg_instance, make_cubic_reg, sample_cubic_reg_stochastic, CubicRegProblem};
pub use ledger::{LedgerSnapshot, Phase, QueryLedger};
pub use libsvm::{parse_libsvm, parse_libsvm_str, LibsvmDataset};
pub use octopus::{make_octopus, Octopus};
pub use quadratic::{diag_quadratic, make_quadratic, Quadratic};
pub use regnls::{make_reg_nls, RegNls};
pub use separable::{make_cube_sum, make_separable_cubic, SeparableCubic};

use crate::error::{require_nonnegative, require_positive, Error, Result};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Locate a data file by name: the name itself as a path, then
/// `data/<name>` under the current directory, then `$ZONCF_DATA_DIR/<name>`.
pub fn find_data_file(name: &str) -> Option<std::path::PathBuf> {
    let direct = std::path::PathBuf::from(name);
    if direct.is_file() {
        return Some(direct);
    }
    let local = std::path::Path::new("data").join(name);
    if local.is_file() {
        return Some(local);
    }
    if let Ok(dir) = std::env::var("ZONCF_DATA_DIR") {
        let p = std::path::Path::new(&dir).join(name);
        if p.is_file() {
            return Some(p);
        }
    }
    None
}

/// Smoothness constants an algorithm is allowed to know about a problem.
///
/// `ell` is the gradient Lipschitz constant, `rho` the Hessian Lipschitz
/// constant, `sigma` a bound on the standard deviation of component gradients
/// around the full gradient (0 for deterministic problems), and `delta_f` an
/// optional upper bound on f(x0) - inf f.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessProfile {
    pub ell: f64,
    pub rho: f64,
    pub sigma: f64,
    pub delta_f: Option<f64>,
}

impl SmoothnessProfile {
    pub fn new(ell: f64, rho: f64, sigma: f64) -> Result<Self> {
        require_positive("ell", ell)?;
        require_nonnegative("rho", rho)?;
        require_nonnegative("sigma", sigma)?;
        Ok(Self { ell, rho, sigma, delta_f: None })
    }

    pub fn with_delta_f(mut self, delta_f: f64) -> Self {
        self.delta_f = Some(delta_f);
        self
    }

    /// Hessian Lipschitz constant as used in parameter derivations.
    /// Exactly quadratic problems declare rho = 0; derived quantities that
    /// divide by rho use this floor instead.
    pub fn rho_derivation(&self) -> f64 {
        if self.rho > 0.0 {
            self.rho
        } else {
            1e-6
        }
    }
}

/// A finite-sum objective. `component` must be deterministic and thread-safe;
/// all randomness lives in the algorithms.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;
    fn n_components(&self) -> usize;
    fn component(&self, i: usize, x: &DVector<f64>) -> f64;

    /// Exact full gradient, when the family has one in closed form.
    /// Test and reporting hook only.
    fn analytic_gradient(&self, _x: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }

    /// Exact full Hessian, when available. Test and reporting hook only.
    fn analytic_hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }

    fn name(&self) -> &'static str {
        "objective"
    }
}

/// Metered view of an [`Objective`]: the only interface algorithms touch.
///
/// Clones share the same ledger, so one instance may serve concurrent runs;
/// evaluation is stateless apart from the synchronized counters.
#[derive(Clone)]
pub struct BlackBoxProblem {
    objective: Arc<dyn Objective>,
    profile: SmoothnessProfile,
    ledger: QueryLedger,
}

impl BlackBoxProblem {
    pub fn new(objective: Arc<dyn Objective>, profile: SmoothnessProfile) -> Result<Self> {
        if objective.dim() == 0 {
            return Err(Error::param("dim", "objective must have dimension >= 1"));
        }
        if objective.n_components() == 0 {
            return Err(Error::param("n_components", "objective must have at least one component"));
        }
        Ok(Self { objective, profile, ledger: QueryLedger::new() })
    }

    /// Same objective and profile, fresh ledger.
    pub fn fresh(&self) -> Self {
        Self {
            objective: Arc::clone(&self.objective),
            profile: self.profile,
            ledger: QueryLedger::new(),
        }
    }

    /// Same objective with a replacement profile (e.g. to attach delta_f),
    /// fresh ledger.
    pub fn with_profile(&self, profile: SmoothnessProfile) -> Self {
        Self { objective: Arc::clone(&self.objective), profile, ledger: QueryLedger::new() }
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn n_components(&self) -> usize {
        self.objective.n_components()
    }

    pub fn profile(&self) -> &SmoothnessProfile {
        &self.profile
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    pub fn name(&self) -> &'static str {
        self.objective.name()
    }

    /// Evaluate component i. Costs exactly one query.
    pub fn eval(&self, i: usize, x: &DVector<f64>, phase: Phase) -> f64 {
        assert!(i < self.n_components(), "component index {i} out of range");
        debug_assert_eq!(x.len(), self.dim());
        self.ledger.record(phase, 1);
        self.objective.component(i, x)
    }

    /// Mean of f_i over a batch of component indices. Costs batch.len() queries.
    pub fn eval_batch_mean(&self, batch: &[usize], x: &DVector<f64>, phase: Phase) -> f64 {
        assert!(!batch.is_empty(), "empty batch");
        self.ledger.record(phase, batch.len() as u64);
        let mut acc = 0.0;
        for &i in batch {
            assert!(i < self.n_components(), "component index {i} out of range");
            acc += self.objective.component(i, x);
        }
        acc / batch.len() as f64
    }

    /// Full objective value, metered: costs n queries.
    pub fn eval_full(&self, x: &DVector<f64>, phase: Phase) -> f64 {
        let n = self.n_components();
        self.ledger.record(phase, n as u64);
        self.full_value_raw(x)
    }

    /// Full objective value for instrumentation (trajectory records, test
    /// oracles). Never counted in the ledger; solvers must not call this.
    pub fn full_value_unmetered(&self, x: &DVector<f64>) -> f64 {
        self.full_value_raw(x)
    }

    /// Single-component value for instrumentation. Never counted in the
    /// ledger; solvers must not call this.
    pub fn component_unmetered(&self, i: usize, x: &DVector<f64>) -> f64 {
        assert!(i < self.n_components(), "component index out of range");
        self.objective.component(i, x)
    }

    fn full_value_raw(&self, x: &DVector<f64>) -> f64 {
        let n = self.n_components();
        let mut acc = 0.0;
        for i in 0..n {
            acc += self.objective.component(i, x);
        }
        acc / n as f64
    }

    /// Unmetered analytic gradient hook; None when the family has no closed form.
    pub fn analytic_gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        self.objective.analytic_gradient(x)
    }

    /// Unmetered analytic Hessian hook; None when the family has no closed form.
    pub fn analytic_hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        self.objective.analytic_hessian(x)
    }
}

impl std::fmt::Debug for BlackBoxProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlackBoxProblem")
            .field("name", &self.name())
            .field("dim", &self.dim())
            .field("n_components", &self.n_components())
            .field("profile", &self.profile)
            .field("ledger", &self.ledger)
            .finish()
    }
}

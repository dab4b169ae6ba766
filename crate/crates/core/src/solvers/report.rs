//! Run artifacts shared by every solver: the trajectory of recorded events,
//! the termination verdict, and the final report carrying a run-relative
//! ledger snapshot.
//!
//! Every trajectory record is written immediately after its event finishes,
//! with `query_total` read from the problem ledger, so `query_total` is
//! strictly increasing and the last record equals the run's total spend.
//! `f_value` is the unmetered full objective value: instrumentation for
//! plotting and tests, never charged to the budget.

use crate::estimators::Verdict;
use crate::oracle::{BlackBoxProblem, LedgerSnapshot};
use nalgebra::DVector;

/// Why a solver returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Last verification Small and last NCF outcome Bottom: the returned
    /// point carries an (epsilon, delta) certificate at the run's
    /// confidence level.
    SospCertified,
    /// Iteration cap reached (outer cap for ZO-SPIDER-NCF).
    IterationCapReached,
    /// Query budget exhausted. The budget is checked between events, so the
    /// final total may overshoot by the cost of the event in flight.
    QueryBudgetExhausted,
    /// First-order exit ||v_k|| <= 2 eps_tilde of the standalone SPIDER
    /// descent loop. No second-order certificate attached.
    GradConverged,
}

/// One solver event. `tag` collapses the payload to the four-word vocabulary
/// the harness CSV schema uses.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    /// Gradient-norm verification at the current iterate.
    Verify { verdict: Verdict, observed_norm: f64, batch: usize },
    /// One descent step (GD/SGD families). `batch` is the component batch
    /// behind the gradient estimate.
    Descent { step_norm: f64, batch: usize },
    /// One full SCSG epoch treated as a single descent event.
    ScsgEpoch { anchor_batch: usize, inner_steps: usize, inner_batch: usize },
    /// An NCF subroutine call that returned Bottom (GD/SGD/SCSG record
    /// Direction outcomes as their `NcStep` instead; SPIDER records every
    /// call).
    NcfCall { found_direction: bool },
    /// The delta/rho jump along a certified negative-curvature direction.
    /// For the GD/SGD/SCSG families the record's queries include the NCF
    /// call that produced the direction: the call and the jump are one
    /// decision, and the jump itself is query-free under the random sign.
    NcStep { sign: f64 },
    /// One SPIDER iterate update, descent (`nc: false`) or a negative
    /// curvature mini-step (`nc: true`). `refresh` marks the k = 0 mod q
    /// full re-estimate; `batch` is |S1| or |S2| for that step.
    SpiderStep { refresh: bool, nc: bool, batch: usize, step_norm: f64 },
}

impl Event {
    pub fn tag(&self) -> &'static str {
        match self {
            Event::Verify { .. } => "verify",
            Event::Descent { .. } | Event::ScsgEpoch { .. } => "descent",
            Event::NcfCall { .. } => "ncf_call",
            Event::NcStep { .. } => "nc_step",
            Event::SpiderStep { nc: true, .. } => "nc_step",
            Event::SpiderStep { nc: false, .. } => "descent",
        }
    }
}

/// One trajectory entry: cumulative run-relative queries after the event,
/// the unmetered full objective at the current iterate, and the event.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub query_total: u64,
    pub f_value: f64,
    pub event: Event,
}

/// Per-step SPIDER diagnostics, populated only when
/// `SolverParams::record_iterates` is set: the iterate and estimate before
/// the step. Test instrumentation for the estimate-quality invariant.
#[derive(Debug, Clone)]
pub struct SpiderDiag {
    pub x: DVector<f64>,
    pub v: DVector<f64>,
    pub refresh: bool,
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub x_star: DVector<f64>,
    pub termination: Termination,
    pub trajectory: Vec<TrajectoryRecord>,
    /// Run-relative ledger snapshot (phases since the solver started).
    pub ledger: LedgerSnapshot,
    /// Empty unless the run recorded SPIDER diagnostics.
    pub spider_diag: Vec<SpiderDiag>,
}

impl SolverReport {
    pub fn queries_spent(&self) -> u64 {
        self.ledger.total()
    }

    /// Records with the given harness tag, in trajectory order.
    pub fn events_tagged(&self, tag: &str) -> Vec<&TrajectoryRecord> {
        self.trajectory.iter().filter(|r| r.event.tag() == tag).collect()
    }
}

/// Builds the trajectory while a solver runs. All query counts are relative
/// to the ledger state captured at construction.
pub(crate) struct Recorder {
    start: LedgerSnapshot,
    records: Vec<TrajectoryRecord>,
    diag: Vec<SpiderDiag>,
}

impl Recorder {
    pub(crate) fn new(problem: &BlackBoxProblem) -> Self {
        Recorder { start: problem.ledger().snapshot(), records: Vec::new(), diag: Vec::new() }
    }

    pub(crate) fn spent(&self, problem: &BlackBoxProblem) -> u64 {
        problem.ledger().total() - self.start.total()
    }

    pub(crate) fn record(&mut self, problem: &BlackBoxProblem, x: &DVector<f64>, event: Event) {
        let query_total = self.spent(problem);
        debug_assert!(
            self.records.last().map_or(query_total > 0, |r| query_total > r.query_total),
            "every recorded event must have spent queries"
        );
        let f_value = problem.full_value_unmetered(x);
        self.records.push(TrajectoryRecord { query_total, f_value, event });
    }

    pub(crate) fn push_diag(&mut self, x: &DVector<f64>, v: &DVector<f64>, refresh: bool) {
        self.diag.push(SpiderDiag { x: x.clone(), v: v.clone(), refresh });
    }

    pub(crate) fn finish(
        self,
        problem: &BlackBoxProblem,
        x_star: DVector<f64>,
        termination: Termination,
    ) -> SolverReport {
        SolverReport {
            x_star,
            termination,
            trajectory: self.records,
            ledger: problem.ledger().snapshot().since(&self.start),
            spider_diag: self.diag,
        }
    }
}

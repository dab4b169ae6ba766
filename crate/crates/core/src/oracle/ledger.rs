use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

/// Accounting category for a function query. Every oracle evaluation is
/// attributed to exactly one phase, so the ledger total is always the sum
/// of the phase counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Gradient estimation driving descent steps.
    GradEst,
    /// Negative-curvature-finding subroutines (Hessian-vector probes included).
    Ncf,
    /// Gradient-norm verification tests.
    Verify,
    /// Direct objective evaluations (baseline triplet moves, greedy sign checks).
    Other,
}

#[derive(Default)]
struct Counters {
    grad_est: AtomicU64,
    ncf: AtomicU64,
    verify: AtomicU64,
    other: AtomicU64,
}

/// Thread-safe query counter shared by all clones of a problem instance.
///
/// Counts function queries exactly: one unit per component evaluation.
/// Instrumentation reads (trajectory f values, analytic hooks) never touch it.
#[derive(Clone, Default)]
pub struct QueryLedger {
    counters: Arc<Counters>,
}

/// Point-in-time copy of the ledger, safe to compare and serialize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LedgerSnapshot {
    pub grad_est: u64,
    pub ncf: u64,
    pub verify: u64,
    pub other: u64,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, phase: Phase, queries: u64) {
        let counter = match phase {
            Phase::GradEst => &self.counters.grad_est,
            Phase::Ncf => &self.counters.ncf,
            Phase::Verify => &self.counters.verify,
            Phase::Other => &self.counters.other,
        };
        counter.fetch_add(queries, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            grad_est: self.counters.grad_est.load(Ordering::Relaxed),
            ncf: self.counters.ncf.load(Ordering::Relaxed),
            verify: self.counters.verify.load(Ordering::Relaxed),
            other: self.counters.other.load(Ordering::Relaxed),
        }
    }

    pub fn total(&self) -> u64 {
        self.snapshot().total()
    }
}

impl LedgerSnapshot {
    pub fn total(&self) -> u64 {
        self.grad_est + self.ncf + self.verify + self.other
    }

    /// Queries accumulated since an earlier snapshot of the same ledger.
    pub fn since(&self, earlier: &LedgerSnapshot) -> LedgerSnapshot {
        LedgerSnapshot {
            grad_est: self.grad_est - earlier.grad_est,
            ncf: self.ncf - earlier.ncf,
            verify: self.verify - earlier.verify,
            other: self.other - earlier.other,
        }
    }
}

impl fmt::Debug for QueryLedger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let snap = self.snapshot();
        write!(
            f,
            "QueryLedger {{ grad_est: {}, ncf: {}, verify: {}, other: {}, total: {} }}",
            snap.grad_est,
            snap.ncf,
            snap.verify,
            snap.other,
            snap.total()
        )
    }
}

//! Experiment harness: declarative TOML configs wiring problems to solvers
//! and baselines, a parallel runner emitting per-run CSV trajectories with a
//! summary table and an SVG convergence plot, and runtime invariant suites
//! with machine-readable JSON reports.

pub mod config;
pub mod invariants;
pub mod plot;
pub mod runner;

pub use config::{AlgorithmSpec, ExperimentConfig, ProblemSpec, KNOWN_ALGORITHMS};
pub use invariants::{run_invariants, InvariantRecord, SuiteSelect};
pub use plot::{emit_plot, plot_dir, read_trajectories, PlotStyle, Series};
pub use runner::{run_experiment, RunOutcome, CSV_HEADER, SUMMARY_HEADER};

/// Harness-level failures: config rejection, dataset I/O, malformed
/// trajectory files. Core solver errors pass through unchanged.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] zoncf_core::error::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("toml: {0}")]
    TomlDe(#[from] toml::de::Error),
    #[error("toml: {0}")]
    TomlSer(#[from] toml::ser::Error),
    #[error("{0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

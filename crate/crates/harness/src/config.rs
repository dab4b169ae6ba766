//! Declarative experiment configs. One TOML file describes a problem
//! instance, the algorithms to run on it with per-algorithm overrides, the
//! accuracy targets, the seed list, and the query budget; the checked-in
//! `configs/` directory carries one file per benchmark figure.

use crate::{HarnessError, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use zoncf_core::oracle::{
    cubic_reg_instance, find_data_file, make_octopus, make_reg_nls, parse_libsvm,
    sample_cubic_reg_stochastic, BlackBoxProblem,
};

/// Every algorithm name `run_experiment` can dispatch.
pub const KNOWN_ALGORITHMS: [&str; 8] = [
    "zo-gd-ncf",
    "zo-sgd-ncf",
    "zo-scsg-ncf",
    "zo-spider-ncf",
    "zo-spider-coord",
    "zpsgd",
    "pagd",
    "rspi",
];

fn default_e() -> f64 {
    std::f64::consts::E
}

fn default_one() -> f64 {
    1.0
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}

/// Problem instance selector. The variant tag is the `kind` key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemSpec {
    /// Chain-of-saddles benchmark; defaults follow the benchmark tables
    /// (tau = L = e, gamma = 1).
    Octopus {
        d: usize,
        #[serde(default = "default_e")]
        tau: f64,
        #[serde(default = "default_e")]
        big_l: f64,
        #[serde(default = "default_one")]
        gamma: f64,
    },
    /// Deterministic cubic regularization with the seeded benchmark
    /// diagonal.
    CubicDet {
        d: usize,
        #[serde(default)]
        instance_seed: u64,
        #[serde(default = "default_one")]
        alpha: f64,
    },
    /// Finite-sum cubic regularization with n sampled components.
    CubicStoch {
        d: usize,
        n: usize,
        #[serde(default)]
        instance_seed: u64,
        #[serde(default = "default_one")]
        alpha: f64,
    },
    /// Regularized nonlinear least squares on a LIBSVM-format dataset,
    /// located via the current directory, `data/`, or `ZONCF_DATA_DIR`.
    RegNls {
        dataset: String,
        #[serde(default = "default_one")]
        lambda: f64,
        #[serde(default = "default_one")]
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
    },
}

impl ProblemSpec {
    /// Constructs a fresh instance: new ledger, same parameters. The runner
    /// calls this once per (algorithm, seed) pair.
    pub fn build(&self) -> Result<BlackBoxProblem> {
        match self {
            ProblemSpec::Octopus { d, tau, big_l, gamma } => {
                Ok(make_octopus(*d, *tau, *big_l, *gamma)?)
            }
            ProblemSpec::CubicDet { d, instance_seed, alpha } => {
                Ok(cubic_reg_instance(*d, *instance_seed, *alpha)?)
            }
            ProblemSpec::CubicStoch { d, n, instance_seed, alpha } => {
                Ok(sample_cubic_reg_stochastic(*d, *instance_seed, *alpha, *n)?)
            }
            ProblemSpec::RegNls { dataset, lambda, alpha, dim } => {
                let path = find_data_file(dataset).ok_or_else(|| {
                    HarnessError::Io(std::io::Error::new(
                        std::io::ErrorKind::NotFound,
                        format!("dataset {dataset} not found (tried cwd, data/, ZONCF_DATA_DIR)"),
                    ))
                })?;
                let mut data = parse_libsvm(&path)?;
                if let Some(d) = dim {
                    data = data.with_dim(*d)?;
                }
                Ok(make_reg_nls(data, *lambda, *alpha)?)
            }
        }
    }
}

/// One algorithm entry: the dispatch name plus optional overrides. Unset
/// knobs fall back to the solver or baseline defaults documented in the
/// runner; unknown keys are rejected at parse time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub name: String,
    // Shared solver knobs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    /// Gradient estimator option for the stochastic solvers: 1 or 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub option: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub greedy_nc_sign: Option<bool>,
    // Batch schedules (SGD / SCSG / SPIDER).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_batch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_b: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub small_b: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scsg_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s2: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_tilde_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mini_epoch: Option<usize>,
    // NCF schedule overrides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ncf_kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ncf_t_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ncf_eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ncf_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ncf_r: Option<f64>,
    // ZPSGD.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_r: Option<f64>,
    // PAGD.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_thres: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_thres: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_thres: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_low: Option<f64>,
    // RSPI / DFPI.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_sigma1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_sigma1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_dfpi: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dfpi_eta: Option<f64>,
}

impl AlgorithmSpec {
    pub fn named(name: &str) -> Self {
        AlgorithmSpec { name: name.to_string(), ..Default::default() }
    }
}

/// A full experiment: problem, algorithm list, targets, seeds, budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub epsilon: f64,
    /// Curvature target. Omitted applies delta = sqrt(rho' epsilon) with
    /// rho' the problem profile's derivation constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub query_budget: u64,
    /// Default output directory; `--out` overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub problem: ProblemSpec,
    #[serde(rename = "algorithm")]
    pub algorithms: Vec<AlgorithmSpec>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Structural checks that must pass before any run starts.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(HarnessError::Config(msg));
        if self.name.is_empty() {
            return fail("experiment name must be nonempty".into());
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return fail(format!("epsilon must be positive and finite, got {}", self.epsilon));
        }
        if let Some(delta) = self.delta {
            if !(delta.is_finite() && delta > 0.0) {
                return fail(format!("delta must be positive and finite, got {delta}"));
            }
        }
        if self.seeds.is_empty() {
            return fail("seeds list must be nonempty".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return fail("seeds list contains duplicates".into());
        }
        if self.query_budget == 0 {
            return fail("query_budget must be positive".into());
        }
        if self.algorithms.is_empty() {
            return fail("algorithm list must be nonempty".into());
        }
        let mut names: Vec<&str> = Vec::new();
        for alg in &self.algorithms {
            if !KNOWN_ALGORITHMS.contains(&alg.name.as_str()) {
                return fail(format!(
                    "unknown algorithm {:?}; known: {}",
                    alg.name,
                    KNOWN_ALGORITHMS.join(", ")
                ));
            }
            if names.contains(&alg.name.as_str()) {
                return fail(format!("algorithm {:?} listed twice", alg.name));
            }
            names.push(&alg.name);
            if let Some(preset) = &alg.preset {
                if preset != "practical" && preset != "theory" {
                    return fail(format!(
                        "preset must be \"practical\" or \"theory\", got {preset:?}"
                    ));
                }
            }
            if let Some(option) = alg.option {
                if option != 1 && option != 2 {
                    return fail(format!("option must be 1 or 2, got {option}"));
                }
            }
        }
        Ok(())
    }

    /// The configured delta, or the sqrt(rho' epsilon) rule against the
    /// problem's derivation constant (the Hessian Lipschitz constant with a
    /// small positive floor at rho = 0).
    pub fn resolved_delta(&self, problem: &BlackBoxProblem) -> f64 {
        self.delta
            .unwrap_or_else(|| (problem.profile().rho_derivation() * self.epsilon).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_toml() -> &'static str {
        r#"
name = "octopus-smoke"
epsilon = 1e-4
query_budget = 100000
seeds = [0, 1]

[problem]
kind = "octopus"
d = 4

[[algorithm]]
name = "zo-gd-ncf"
eta = 0.05
p = 0.01

[[algorithm]]
name = "rspi"
sigma1 = 1.0
sigma2 = 1.25
rho_sigma1 = 0.95
t_sigma1 = 20
t_dfpi = 20
"#
    }

    #[test]
    fn parses_and_applies_table_defaults() {
        let config = ExperimentConfig::from_toml_str(sample_toml()).unwrap();
        assert_eq!(config.name, "octopus-smoke");
        match &config.problem {
            ProblemSpec::Octopus { d, tau, big_l, gamma } => {
                assert_eq!(*d, 4);
                assert_eq!(*tau, std::f64::consts::E);
                assert_eq!(*big_l, std::f64::consts::E);
                assert_eq!(*gamma, 1.0);
            }
            other => panic!("wrong problem {other:?}"),
        }
        assert_eq!(config.algorithms[1].t_dfpi, Some(20));
        let problem = config.problem.build().unwrap();
        // delta = sqrt(rho epsilon) = sqrt(e * 1e-4).
        let expected = (std::f64::consts::E * 1e-4).sqrt();
        assert_eq!(config.resolved_delta(&problem), expected);
    }

    #[test]
    fn round_trip_is_identity() {
        let config = ExperimentConfig::from_toml_str(sample_toml()).unwrap();
        let text = config.to_toml_string().unwrap();
        let reparsed = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(config, reparsed);
    }

    #[test]
    fn default_seeds_are_zero_through_four() {
        let text = sample_toml().replace("seeds = [0, 1]\n", "");
        let config = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(config.seeds, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            ("seeds = [0, 1]", "seeds = []", "seeds list must be nonempty"),
            ("seeds = [0, 1]", "seeds = [3, 3]", "duplicates"),
            ("name = \"zo-gd-ncf\"\neta = 0.05", "name = \"newton\"\neta = 0.05", "unknown algorithm"),
            ("query_budget = 100000", "query_budget = 0", "query_budget"),
            ("epsilon = 1e-4", "epsilon = -1.0", "epsilon"),
        ];
        for (from, to, needle) in cases {
            let text = sample_toml().replace(from, to);
            let err = ExperimentConfig::from_toml_str(&text).unwrap_err().to_string();
            assert!(err.contains(needle), "expected {needle:?} in {err:?}");
        }
    }

    #[test]
    fn rejects_unknown_keys_and_duplicate_algorithms() {
        let text = sample_toml().replace("eta = 0.05", "learning_rate = 0.05");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
        let text = sample_toml().replace("name = \"rspi\"", "name = \"zo-gd-ncf\"");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("listed twice"));
    }

    #[test]
    fn explicit_delta_wins_over_the_rule() {
        let text = sample_toml().replace("epsilon = 1e-4", "epsilon = 1e-4\ndelta = 0.5");
        let config = ExperimentConfig::from_toml_str(&text).unwrap();
        let problem = config.problem.build().unwrap();
        assert_eq!(config.resolved_delta(&problem), 0.5);
    }

    #[test]
    fn missing_dataset_is_an_io_error() {
        let spec = ProblemSpec::RegNls {
            dataset: "definitely-not-here.libsvm".into(),
            lambda: 1.0,
            alpha: 1.0,
            dim: None,
        };
        match spec.build() {
            Err(HarnessError::Io(e)) => assert_eq!(e.kind(), std::io::ErrorKind::NotFound),
            other => panic!("expected io error, got {other:?}"),
        }
    }
}

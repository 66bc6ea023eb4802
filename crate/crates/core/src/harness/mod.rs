//! Monte Carlo coverage, BER sweeps with the MAE proxy, and analytic oracles.

pub mod analytic;
mod coverage;
mod proxy;
pub mod report;
pub mod stats;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::faults::{DaePolicy, FaultError, Region, Scenario};

pub use coverage::{
    parse_dist, run_coverage, structural_expectation, CoverageConfig, CoverageTally, Structural, ValueDist,
};
pub use proxy::{run_ber_proxy, ProxyConfig, ProxyReport};

pub const THREADS_ENV: &str = "RANGEGUARD_THREADS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Fault(#[from] FaultError),
    #[error("scenario file: {0}")]
    ScenarioFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    Threads(String),
}

/// Thread count from the argument, else `RANGEGUARD_THREADS`, else rayon's default.
pub fn resolve_threads(arg: Option<usize>) -> Result<Option<usize>, HarnessError> {
    if let Some(n) = arg {
        return if n == 0 { Err(HarnessError::Invalid("threads must be at least 1".into())) } else { Ok(Some(n)) };
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(HarnessError::Invalid(format!("{THREADS_ENV}={v} is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs `f` inside a dedicated pool of `threads` workers (rayon's global
/// pool when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| HarnessError::Threads(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// One entry of a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    #[serde(default)]
    pub region: Region,
    #[serde(default)]
    pub dae: DaePolicy,
    /// Overrides the command-line trial count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub scenarios: Vec<ScenarioSpec>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let f: Self = serde_json::from_str(text).map_err(|e| HarnessError::ScenarioFile(e.to_string()))?;
        if f.scenarios.is_empty() {
            return Err(HarnessError::ScenarioFile("no scenarios listed".into()));
        }
        if f.scenarios.iter().any(|s| s.trials == Some(0)) {
            return Err(HarnessError::ScenarioFile("trials must be at least 1".into()));
        }
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// The eight single- and double-fault rows plus FC.
pub fn table_scenarios() -> Vec<Scenario> {
    ["SE", "DAE", "16E", "32E", "SE+SE", "SE+DAE", "SE+16E", "SE+32E", "FC"]
        .iter()
        .map(|s| s.parse().expect("fixed names"))
        .collect()
}

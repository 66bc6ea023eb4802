use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{wilson, Z95};
use super::HarnessError;
use crate::bitnum::{encode_value, NumFormat};
use crate::faults::{trial_rng, FaultMode, Injector, Region, Scenario};
use crate::schemes::{bound_violations, set_value, values_per_block, Data256, Outcome, Scheme, SchemeKind};

/// Trials per parallel work item.
pub(crate) const CHUNK: u64 = 4096;

/// How block payloads are populated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ValueDist {
    /// Every payload bit uniform.
    UniformBits,
    /// Values drawn from `N(0, sigma^2)` and rounded to the block format.
    Gaussian { sigma: f64 },
}

impl ValueDist {
    pub fn name(&self) -> &'static str {
        match self {
            ValueDist::UniformBits => "uniform",
            ValueDist::Gaussian { .. } => "gaussian",
        }
    }

    pub fn populate<R: RngCore + ?Sized>(&self, format: NumFormat, rng: &mut R) -> Data256 {
        match *self {
            ValueDist::UniformBits => [rng.next_u64(), rng.next_u64(), rng.next_u64(), rng.next_u64()],
            ValueDist::Gaussian { sigma } => {
                let normal = Normal::new(0.0, sigma).expect("sigma validated");
                let mut d = [0u64; 4];
                for i in 0..values_per_block(format) {
                    let v: f64 = normal.sample(rng);
                    set_value(&mut d, format.total_bits, i, encode_value(v, format).raw());
                }
                d
            }
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        match *self {
            ValueDist::Gaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(HarnessError::Invalid(format!("sigma must be positive and finite, got {sigma}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ValueDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueDist::UniformBits => f.write_str("uniform"),
            ValueDist::Gaussian { sigma } => write!(f, "gaussian({sigma})"),
        }
    }
}

/// Parses `uniform` or `gaussian`; the latter takes the supplied sigma.
pub fn parse_dist(name: &str, sigma: f64) -> Result<ValueDist, HarnessError> {
    let d = match name {
        "uniform" => ValueDist::UniformBits,
        "gaussian" => ValueDist::Gaussian { sigma },
        other => return Err(HarnessError::Invalid(format!("unknown value distribution `{other}`"))),
    };
    d.validate()?;
    Ok(d)
}

#[derive(Debug, Clone)]
pub struct CoverageConfig<'a> {
    pub scheme: &'a Scheme,
    /// Format used to populate blocks.
    pub format: NumFormat,
    pub scenario: Scenario,
    pub trials: u64,
    pub seed: u64,
    pub dist: ValueDist,
    pub injector: Injector,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageTally {
    pub scheme: SchemeKind,
    pub scenario: String,
    pub region: Region,
    pub trials: u64,
    /// Indexed by [`Outcome::index`].
    pub counts: [u64; 5],
    /// BE trials where some value moved farther than its golden range width.
    pub bound_violations: u64,
    /// Trials whose RID-symbol error count was within the code's capability.
    pub within_t: u64,
    /// Of those, trials that still ended in DUE or SDC.
    pub within_t_failures: u64,
}

impl CoverageTally {
    pub fn empty(scheme: SchemeKind, scenario: &Scenario, region: Region) -> Self {
        Self {
            scheme,
            scenario: scenario.name(),
            region,
            trials: 0,
            counts: [0; 5],
            bound_violations: 0,
            within_t: 0,
            within_t_failures: 0,
        }
    }

    pub fn merge(mut self, other: &Self) -> Self {
        self.trials += other.trials;
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.bound_violations += other.bound_violations;
        self.within_t += other.within_t;
        self.within_t_failures += other.within_t_failures;
        self
    }

    pub fn count(&self, o: Outcome) -> u64 {
        self.counts[o.index()]
    }

    pub fn fraction(&self, o: Outcome) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.count(o) as f64 / self.trials as f64
        }
    }

    pub fn percent(&self, o: Outcome) -> f64 {
        100.0 * self.fraction(o)
    }

    pub fn ci(&self, o: Outcome) -> (f64, f64) {
        wilson(self.count(o), self.trials, Z95)
    }

    /// Trials that were not DUE or SDC.
    pub fn success(&self) -> u64 {
        self.count(Outcome::NoError) + self.count(Outcome::Ce) + self.count(Outcome::Be)
    }

    pub fn expectation(&self) -> Option<Structural> {
        let scenario: Scenario = self.scenario.parse().ok()?;
        structural_expectation(self.scheme, &scenario, self.region)
    }

    /// `Some(true)` when a structural cell holds, `Some(false)` when violated.
    pub fn structural_ok(&self) -> Option<bool> {
        self.expectation().map(|e| match e {
            Structural::AllBoundedOrCorrected => {
                self.count(Outcome::Due) == 0 && self.count(Outcome::Sdc) == 0 && self.bound_violations == 0
            }
            Structural::AllCorrected => self.count(Outcome::Ce) == self.trials,
        })
    }
}

/// Cells that hold by construction, independent of the trial count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structural {
    /// Zero DUE and zero SDC.
    AllBoundedOrCorrected,
    /// Every trial exactly corrected.
    AllCorrected,
}

pub fn structural_expectation(scheme: SchemeKind, scenario: &Scenario, region: Region) -> Option<Structural> {
    let local = |m: &FaultMode| *m != FaultMode::Fc;
    let modes = &scenario.modes;
    match scheme {
        // Lane-resident windows can hit several parity symbols at once.
        SchemeKind::RgSsc8 if region == Region::DataOnly && modes.len() == 1 && local(&modes[0]) => {
            Some(Structural::AllBoundedOrCorrected)
        }
        SchemeKind::RgDsc4 if region == Region::DataOnly && modes.iter().all(local) => {
            Some(Structural::AllBoundedOrCorrected)
        }
        SchemeKind::Baseline
            if modes.len() == 1 && matches!(modes[0], FaultMode::Se | FaultMode::Dae | FaultMode::E16) =>
        {
            Some(Structural::AllCorrected)
        }
        _ => None,
    }
}

fn run_range(cfg: &CoverageConfig<'_>, start: u64, end: u64) -> CoverageTally {
    let scheme = cfg.scheme;
    let mut tally = CoverageTally::empty(scheme.kind(), &cfg.scenario, cfg.injector.region);
    let rg = match scheme {
        Scheme::RangeGuard(s) => Some(s),
        _ => None,
    };
    for i in start..end {
        let mut rng = trial_rng(cfg.seed, i);
        let data = cfg.dist.populate(cfg.format, &mut rng);
        let stored = scheme.encode(&data);
        let (mask, _) = cfg.injector.inject_scenario(&cfg.scenario, &mut rng);
        let mut read = stored;
        read.apply_mask(&mask);
        let res = scheme.decode(&read);
        let outcome = scheme.classify(&stored.data, &res, true);
        tally.trials += 1;
        tally.counts[outcome.index()] += 1;
        if let Some(rg) = rg {
            if outcome == Outcome::Be && !bound_violations(&stored.data, &res.data, res.substituted, rg.map()).is_empty() {
                tally.bound_violations += 1;
            }
            if rg.symbol_errors(&stored, &read) <= rg.rs().t() {
                tally.within_t += 1;
                if matches!(outcome, Outcome::Due | Outcome::Sdc) {
                    tally.within_t_failures += 1;
                }
            }
        }
    }
    tally
}

/// Monte Carlo coverage of one scheme under one scenario. Trial `i` uses the
/// stream `(seed, i)`, so the tally does not depend on the thread count.
pub fn run_coverage(cfg: &CoverageConfig<'_>) -> Result<CoverageTally, HarnessError> {
    if cfg.trials == 0 {
        return Err(HarnessError::Invalid("trials must be at least 1".into()));
    }
    cfg.dist.validate()?;
    if let Some(m) = cfg.scheme.map() {
        if m.format() != cfg.format {
            return Err(HarnessError::Invalid(format!("block format {} differs from map format {}", cfg.format, m.format())));
        }
    }
    let chunks = cfg.trials.div_ceil(CHUNK);
    let empty = CoverageTally::empty(cfg.scheme.kind(), &cfg.scenario, cfg.injector.region);
    Ok((0..chunks)
        .into_par_iter()
        .map(|c| run_range(cfg, c * CHUNK, ((c + 1) * CHUNK).min(cfg.trials)))
        .reduce(|| empty.clone(), |a, b| a.merge(&b)))
}

impl FromStr for ValueDist {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some(("gaussian", sigma)) => {
                let sigma = sigma.parse().map_err(|_| HarnessError::Invalid(format!("bad sigma in `{s}`")))?;
                parse_dist("gaussian", sigma)
            }
            _ => parse_dist(s, 1.0),
        }
    }
}

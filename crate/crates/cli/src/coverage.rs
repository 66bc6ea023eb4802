use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, ValueEnum};
use rangeguard_core::bitnum::NumFormat;
use rangeguard_core::faults::{DaePolicy, Injector, Region, Scenario};
use rangeguard_core::harness::report::{coverage_csv, coverage_json};
use rangeguard_core::harness::{
    parse_dist, resolve_threads, run_coverage, table_scenarios, with_threads, CoverageConfig, ScenarioFile,
    ScenarioSpec,
};
use rangeguard_core::rangemap::RangeMap;
use rangeguard_core::schemes::{Scheme, SchemeKind};

use crate::{emit, write_json, CliError, CliResult};

#[derive(Clone, Copy, ValueEnum)]
pub enum RegionArg {
    DataOnly,
    FullImage,
}

impl From<RegionArg> for Region {
    fn from(r: RegionArg) -> Self {
        match r {
            RegionArg::DataOnly => Region::DataOnly,
            RegionArg::FullImage => Region::FullImage,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum DaeArg {
    Half,
    Both,
}

#[derive(Args)]
pub struct CoverageArgs {
    /// Scheme names (rg-ssc8, rg-dsc4, baseline, secded, ssc8, weight-nulling, none); repeatable.
    #[arg(long = "scheme", required = true)]
    schemes: Vec<String>,
    /// Range map JSON, required by the rg-* schemes.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Scenario such as `SE` or `SE+32E`; repeatable. Defaults to the full table.
    #[arg(long = "scenario", conflicts_with = "scenario_file")]
    scenarios: Vec<String>,
    /// JSON scenario list.
    #[arg(long)]
    scenario_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Block contents: gaussian or uniform.
    #[arg(long, default_value = "gaussian")]
    dist: String,
    /// Gaussian sigma; defaults to the map's sigma, else 1.
    #[arg(long)]
    sigma: Option<f64>,
    /// Block format; defaults to the map's format, else bf16.
    #[arg(long)]
    format: Option<String>,
    #[arg(long, value_enum, default_value = "data-only")]
    region: RegionArg,
    #[arg(long, value_enum, default_value = "half")]
    dae: DaeArg,
    /// RID slot width per value inside a symbol.
    #[arg(long)]
    rid_bits: Option<u32>,
    /// Worker threads (default: RANGEGUARD_THREADS or all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// CSV destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

/// Map, format and sigma shared by the scheme-building commands.
pub struct Context {
    pub map: Option<Arc<RangeMap>>,
    pub format: NumFormat,
    pub sigma: f64,
}

pub fn context(map: Option<&PathBuf>, format: Option<&str>, sigma: Option<f64>) -> CliResult<Context> {
    let map = match map {
        Some(p) => Some(Arc::new(RangeMap::load(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?)),
        None => None,
    };
    let format = match (format, &map) {
        (Some(f), Some(m)) => {
            let f = NumFormat::from_name(f).map_err(CliError::usage)?;
            if f != m.format() {
                return Err(CliError::Usage(format!("--format {f} conflicts with the map's {}", m.format())));
            }
            f
        }
        (Some(f), None) => NumFormat::from_name(f).map_err(CliError::usage)?,
        (None, Some(m)) => m.format(),
        (None, None) => NumFormat::BF16,
    };
    let sigma = sigma.unwrap_or_else(|| map.as_ref().map(|m| m.sigma()).filter(|s| *s > 0.0 && s.is_finite()).unwrap_or(1.0));
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(CliError::Usage(format!("--sigma must be positive and finite, got {sigma}")));
    }
    Ok(Context { map, format, sigma })
}

pub fn build_scheme(name: &str, ctx: &Context, rid_bits: Option<u32>) -> CliResult<Scheme> {
    let kind = SchemeKind::from_name(name).map_err(CliError::usage)?;
    Scheme::build(kind, ctx.format, if kind.is_rangeguard() { ctx.map.clone() } else { None }, rid_bits)
        .map_err(CliError::usage)
}

pub fn run(a: CoverageArgs) -> CliResult {
    if a.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let ctx = context(a.map.as_ref(), a.format.as_deref(), a.sigma)?;
    let dist = parse_dist(&a.dist, ctx.sigma).map_err(CliError::usage)?;
    let schemes = a.schemes.iter().map(|n| build_scheme(n, &ctx, a.rid_bits)).collect::<CliResult<Vec<_>>>()?;
    let dae = match a.dae {
        DaeArg::Half => DaePolicy::HalfProbability,
        DaeArg::Both => DaePolicy::BothBits,
    };
    let specs: Vec<ScenarioSpec> = if let Some(p) = &a.scenario_file {
        ScenarioFile::load(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?.scenarios
    } else {
        let list: Vec<Scenario> = if a.scenarios.is_empty() {
            table_scenarios()
        } else {
            a.scenarios.iter().map(|s| s.parse().map_err(CliError::usage)).collect::<CliResult<_>>()?
        };
        list.into_iter().map(|scenario| ScenarioSpec { scenario, region: a.region.into(), dae, trials: None }).collect()
    };
    let threads = resolve_threads(a.threads).map_err(CliError::usage)?;

    let mut tallies = Vec::new();
    for spec in &specs {
        for scheme in &schemes {
            let cfg = CoverageConfig {
                scheme,
                format: ctx.format,
                scenario: spec.scenario.clone(),
                trials: spec.trials.unwrap_or(a.trials),
                seed: a.seed,
                dist,
                injector: Injector::new(spec.region, spec.dae),
            };
            let t = with_threads(threads, || run_coverage(&cfg)).map_err(CliError::usage)?.map_err(CliError::usage)?;
            tallies.push(t);
        }
    }
    emit(a.out.as_deref(), &coverage_csv(&tallies))?;
    write_json(a.json.as_ref(), &coverage_json(&tallies))?;

    let failed: Vec<String> = tallies
        .iter()
        .filter(|t| t.structural_ok() == Some(false))
        .map(|t| format!("{} under {}", t.scheme, t.scenario))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Violation(format!("structural cells off 100%: {}", failed.join(", "))))
    }
}

use std::path::PathBuf;

use clap::{Subcommand, ValueEnum};
use rand_distr::{Distribution, Normal};
use rangeguard_core::bitnum::{BitWord, NumFormat};
use rangeguard_core::faults::trial_rng;
use rangeguard_core::rangemap::{
    build_ideal_map, build_lloydmax_map, build_simple_map, map_mae, ExponentPmf, Interval, MaeSource, RangeMap,
};
use serde_json::json;

use crate::{emit, CliError, CliResult};

#[derive(Clone, Copy, ValueEnum)]
pub enum Kind {
    Simple,
    Ideal,
    Lloydmax,
}

#[derive(Subcommand)]
pub enum RangemapCmd {
    /// Build a range map and write it as JSON.
    Build {
        #[arg(long, value_enum)]
        kind: Kind,
        /// Standard deviation of the modeled values.
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Number of ranges.
        #[arg(long)]
        ranges: usize,
        #[arg(long, default_value = "bf16")]
        format: String,
        #[arg(long)]
        out: PathBuf,
        /// Gaussian samples drawn for lloydmax.
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn entries_json(map: &RangeMap) -> serde_json::Value {
    let fmt = map.format();
    let rows: Vec<_> = map
        .entries()
        .iter()
        .map(|e| {
            let rep = BitWord::truncating(e.rep_bits, fmt).value();
            match e.interval {
                Interval::Exponent { lo, hi } => json!({"rid": e.rid, "exp_lo": lo, "exp_hi": hi, "rep": rep, "rep_bits": e.rep_bits}),
                Interval::Value { lo, hi } => json!({
                    "rid": e.rid,
                    "lo": if lo.is_finite() { json!(lo) } else { json!(null) },
                    "hi": if hi.is_finite() { json!(hi) } else { json!(null) },
                    "rep": rep,
                    "rep_bits": e.rep_bits,
                }),
            }
        })
        .collect();
    json!(rows)
}

pub fn run(cmd: RangemapCmd) -> CliResult {
    let RangemapCmd::Build { kind, sigma, ranges, format, out, samples, seed } = cmd;
    let fmt = NumFormat::from_name(&format).map_err(CliError::usage)?;
    if ranges < 2 {
        return Err(CliError::Usage(format!("--ranges must be at least 2, got {ranges}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(CliError::Usage(format!("--sigma must be positive and finite, got {sigma}")));
    }
    let mut summary = json!({"kind": null, "format": fmt.name, "sigma": sigma, "ranges": ranges});
    let map = match kind {
        Kind::Simple => {
            let pmf = ExponentPmf::gaussian(sigma, fmt).map_err(CliError::usage)?;
            let map = build_simple_map(&pmf, ranges).map_err(CliError::usage)?;
            summary["kind"] = json!("simple");
            summary["mae"] = json!(map_mae(&map, MaeSource::Pmf(&pmf)).map_err(CliError::usage)?);
            map
        }
        Kind::Ideal => {
            let (map, sol) = build_ideal_map(sigma, ranges, fmt).map_err(CliError::usage)?;
            summary["kind"] = json!("ideal");
            summary["mae"] = json!(map_mae(&map, MaeSource::Gaussian(sigma)).map_err(CliError::usage)?);
            summary["normalized_thresholds"] = json!(sol.thresholds);
            summary["normalized_representatives"] = json!(sol.representatives);
            map
        }
        Kind::Lloydmax => {
            if samples == 0 {
                return Err(CliError::Usage("--samples must be positive".into()));
            }
            let normal = Normal::new(0.0, sigma).map_err(CliError::usage)?;
            let mut rng = trial_rng(seed, 0);
            let xs: Vec<f64> = (0..samples).map(|_| normal.sample(&mut rng)).collect();
            let (map, report) = build_lloydmax_map(&xs, ranges, fmt).map_err(CliError::usage)?;
            summary["kind"] = json!("lloydmax");
            summary["mae"] = json!(map_mae(&map, MaeSource::Samples(&xs)).map_err(CliError::usage)?);
            summary["thresholds"] = json!(report.thresholds);
            summary["representatives"] = json!(report.representatives);
            summary["iterations"] = json!(report.iterations);
            map
        }
    };
    summary["entries"] = entries_json(&map);
    map.save(&out).map_err(|e| CliError::Usage(format!("{}: {e}", out.display())))?;
    summary["out"] = json!(out.display().to_string());
    emit(None, &(serde_json::to_string_pretty(&summary).map_err(CliError::usage)? + "\n"))
}

use std::path::PathBuf;

use clap::Args;
use rangeguard_core::harness::report::{sweep_csv, sweep_json};
use rangeguard_core::harness::{resolve_threads, run_ber_proxy, with_threads, ProxyConfig};
use rangeguard_core::schemes::{values_per_block, Outcome, DATA_BITS};

use crate::coverage::{build_scheme, context, RegionArg};
use crate::{emit, write_json, CliError, CliResult};

#[derive(Args)]
pub struct SweepArgs {
    /// Scheme names; repeatable.
    #[arg(long = "scheme", required = true)]
    schemes: Vec<String>,
    /// Range map JSON; required by rg-* schemes and used for the out-of-range column.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Comma-separated bit error rates in [0, 1e-2].
    #[arg(long, value_delimiter = ',', required = true)]
    ber: Vec<f64>,
    /// Tensor size in bytes (a multiple of 32).
    #[arg(long, conflicts_with = "tensor_values")]
    tensor_bytes: Option<u64>,
    /// Tensor size in values.
    #[arg(long)]
    tensor_values: Option<u64>,
    /// Tensor sigma; defaults to the map's sigma, else 1.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    format: Option<String>,
    #[arg(long, value_enum, default_value = "data-only")]
    region: RegionArg,
    #[arg(long)]
    rid_bits: Option<u32>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

const DEFAULT_VALUES: u64 = 1 << 20;

/// Highest BER at which the deviation bound is enforced. Above it, flips that
/// stay inside the top exponent range (which holds the inf/NaN encodings)
/// can leave non-finite values that no finite width covers.
const BOUND_CHECK_MAX_BER: f64 = 1e-5;

pub fn run(a: SweepArgs) -> CliResult {
    let ctx = context(a.map.as_ref(), a.format.as_deref(), a.sigma)?;
    let vpb = values_per_block(ctx.format) as u64;
    let block_bytes = (DATA_BITS / 8) as u64;
    let values = match (a.tensor_bytes, a.tensor_values) {
        (Some(b), _) => {
            if b == 0 || b % block_bytes != 0 {
                return Err(CliError::Usage(format!("--tensor-bytes must be a positive multiple of {block_bytes}")));
            }
            b / block_bytes * vpb
        }
        (None, Some(v)) => v,
        (None, None) => DEFAULT_VALUES,
    };
    if let Some(bad) = a.ber.iter().find(|b| !(0.0..=1e-2).contains(*b)) {
        return Err(CliError::Usage(format!("BER {bad} outside [0, 1e-2]")));
    }
    let schemes = a.schemes.iter().map(|n| build_scheme(n, &ctx, a.rid_bits)).collect::<CliResult<Vec<_>>>()?;
    let threads = resolve_threads(a.threads).map_err(CliError::usage)?;
    let cfg = ProxyConfig {
        format: ctx.format,
        sigma: ctx.sigma,
        values: values as usize,
        seed: a.seed,
        region: a.region.into(),
    };

    let mut reports = Vec::new();
    for scheme in &schemes {
        let r = with_threads(threads, || run_ber_proxy(scheme, ctx.map.as_deref(), &a.ber, &cfg))
            .map_err(CliError::usage)?
            .map_err(CliError::usage)?;
        reports.extend(r);
    }
    emit(a.out.as_deref(), &sweep_csv(&reports))?;
    write_json(a.json.as_ref(), &sweep_json(&reports))?;

    let unbounded: Vec<String> = reports
        .iter()
        .filter(|r| r.scheme.is_rangeguard() && r.ber <= BOUND_CHECK_MAX_BER)
        .filter(|r| r.count(Outcome::Due) == 0 && r.count(Outcome::Sdc) == 0)
        .filter(|r| r.max_abs_dev > r.max_range_width)
        .map(|r| format!("{} at BER {:e}", r.scheme, r.ber))
        .collect();
    if unbounded.is_empty() {
        Ok(())
    } else {
        Err(CliError::Violation(format!("deviation beyond the widest range: {}", unbounded.join(", "))))
    }
}

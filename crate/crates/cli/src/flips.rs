use std::path::PathBuf;

use clap::Args;
use rangeguard_core::bitnum::{flip_impact_csv, NumFormat};

use crate::{emit, CliError, CliResult};

#[derive(Args)]
pub struct FlipsArgs {
    /// bf16, fp32, fp16, fp8-e4m3, fp8-e5m2 or int8.
    #[arg(long, default_value = "bf16")]
    format: String,
    /// CSV destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(a: FlipsArgs) -> CliResult {
    let fmt = NumFormat::from_name(&a.format).map_err(CliError::usage)?;
    emit(a.out.as_deref(), &flip_impact_csv(fmt))
}

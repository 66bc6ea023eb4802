use std::fmt::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use rangeguard_core::schemes::{
    data_from_bytes, data_to_bytes, DecodeStatus, Scheme, SchemeKind, SchemeRegistry, StoredBlock,
};

use crate::{emit, CliError, CliResult};

const BLOCK: usize = 32;
pub const CODEC_HEADER: &str = "# rangeguard codec v1";

#[derive(Args)]
pub struct Common {
    /// Physical address of the region; bits [57:54] select the scheme (hex with 0x, or decimal).
    #[arg(long, value_parser = parse_address)]
    tag_address: u64,
    /// Scheme registry (TOML, or JSON by extension). Without it only tag 0 (SEC-DED) exists.
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Redundancy sidecar, two bytes per 32-byte block (default: payload path + ".rg").
    #[arg(long)]
    sidecar: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum CodecCmd {
    /// Write the payload and its sidecar.
    Encode(Common),
    /// Check the payload against its sidecar, write repaired bytes and report each block.
    Decode {
        #[command(flatten)]
        common: Common,
        /// Per-block CSV (stdout when omitted).
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn parse_address(s: &str) -> Result<u64, String> {
    let t = s.trim().replace('_', "");
    let r = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse(),
    };
    r.map_err(|e| format!("bad address `{s}`: {e}"))
}

fn sidecar_path(explicit: Option<&PathBuf>, payload: &Path) -> PathBuf {
    explicit.cloned().unwrap_or_else(|| {
        let mut s = payload.as_os_str().to_owned();
        s.push(".rg");
        PathBuf::from(s)
    })
}

fn read(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> CliResult {
    std::fs::write(path, bytes).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn scheme_for(c: &Common) -> CliResult<(u8, Scheme)> {
    let registry = match &c.registry {
        Some(p) => SchemeRegistry::load(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
        None => SchemeRegistry::new(),
    };
    let slot = registry.dispatch(c.tag_address).map_err(CliError::usage)?;
    if slot.scheme.kind() == SchemeKind::Baseline {
        return Err(CliError::Usage("the baseline stack keeps its parity inside the device; pick another scheme".into()));
    }
    Ok((slot.tag, (*slot.scheme).clone()))
}

fn block_at(bytes: &[u8], i: usize) -> [u8; BLOCK] {
    let mut b = [0u8; BLOCK];
    let chunk = &bytes[i * BLOCK..bytes.len().min((i + 1) * BLOCK)];
    b[..chunk.len()].copy_from_slice(chunk);
    b
}

pub fn run(cmd: CodecCmd) -> CliResult {
    match cmd {
        CodecCmd::Encode(c) => {
            let (_, scheme) = scheme_for(&c)?;
            let input = read(&c.input)?;
            let blocks = input.len().div_ceil(BLOCK);
            let mut payload = Vec::with_capacity(input.len());
            let mut side = Vec::with_capacity(2 * blocks);
            for i in 0..blocks {
                let stored = scheme.encode(&data_from_bytes(&block_at(&input, i)));
                let take = (input.len() - i * BLOCK).min(BLOCK);
                payload.extend_from_slice(&data_to_bytes(&stored.data)[..take]);
                side.extend_from_slice(&stored.redundancy.to_le_bytes());
            }
            write(&c.out, &payload)?;
            write(&sidecar_path(c.sidecar.as_ref(), &c.out), &side)
        }
        CodecCmd::Decode { common: c, report } => {
            let (tag, scheme) = scheme_for(&c)?;
            let payload = read(&c.input)?;
            let side_path = sidecar_path(c.sidecar.as_ref(), &c.input);
            let side = read(&side_path)?;
            let blocks = payload.len().div_ceil(BLOCK);
            if side.len() != 2 * blocks {
                return Err(CliError::Usage(format!(
                    "{}: {} bytes, expected {} for {blocks} blocks",
                    side_path.display(),
                    side.len(),
                    2 * blocks
                )));
            }
            let mut out = Vec::with_capacity(payload.len());
            let mut csv = String::new();
            writeln!(csv, "{CODEC_HEADER}").unwrap();
            writeln!(csv, "# tag {tag} scheme {}", scheme.kind()).unwrap();
            writeln!(csv, "block,status,outcome,substituted").unwrap();
            for i in 0..blocks {
                let stored = StoredBlock {
                    data: data_from_bytes(&block_at(&payload, i)),
                    redundancy: u16::from_le_bytes([side[2 * i], side[2 * i + 1]]),
                    ondie: 0,
                };
                let res = scheme.decode(&stored);
                let take = (payload.len() - i * BLOCK).min(BLOCK);
                out.extend_from_slice(&data_to_bytes(&res.data)[..take]);
                // Without a golden copy the decoder's own view is reported.
                let (status, outcome) = match res.status {
                    DecodeStatus::Clean => ("clean", "NoError"),
                    DecodeStatus::Corrected if res.substituted != 0 => ("corrected", "BE"),
                    DecodeStatus::Corrected => ("corrected", "CE"),
                    DecodeStatus::Detected => ("detected", "DUE"),
                };
                writeln!(csv, "{i},{status},{outcome},{}", res.substituted.count_ones()).unwrap();
            }
            write(&c.out, &out)?;
            emit(report.as_deref(), &csv)
        }
    }
}

//! Post-repair error of a synthetic Gaussian tensor under the BER mixture.

use rayon::prelude::*;
use serde::Serialize;

use super::coverage::ValueDist;
use super::HarnessError;
use crate::bitnum::{BitWord, NumFormat};
use crate::faults::{popcount, trial_rng, xor_into, BerMixture, Region, MIXTURE};
use crate::rangemap::RangeMap;
use crate::schemes::{get_value, values_per_block, DecodeResult, Outcome, Scheme, SchemeKind};

/// Blocks per parallel work item; partial sums are combined in chunk order.
const BLOCK_CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxyConfig {
    pub format: NumFormat,
    pub sigma: f64,
    pub values: usize,
    pub seed: u64,
    pub region: Region,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProxyReport {
    pub scheme: SchemeKind,
    pub ber: f64,
    pub values: u64,
    pub blocks: u64,
    pub faulted_blocks: u64,
    /// Events per mixture mode (SE, DAE, 16E, 32E).
    pub mode_events: [u64; 4],
    pub flipped_bits: u64,
    pub measured_ber: f64,
    /// Per-block outcomes, indexed by [`Outcome::index`].
    pub counts: [u64; 5],
    pub mae: f64,
    pub max_abs_dev: f64,
    pub nonfinite_values: u64,
    /// Values whose range under the reference map differs from golden's.
    pub frac_out_of_range: f64,
    pub max_range_width: f64,
}

impl ProxyReport {
    pub fn count(&self, o: Outcome) -> u64 {
        self.counts[o.index()]
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Partial {
    faulted: u64,
    modes: [u64; 4],
    flipped: u64,
    counts: [u64; 5],
    sum_dev: f64,
    max_dev: f64,
    nonfinite: u64,
    out_of_range: u64,
}

fn deviation(golden: u32, repaired: u32, fmt: NumFormat) -> f64 {
    if golden == repaired {
        return 0.0;
    }
    let d = (BitWord::truncating(repaired, fmt).value() - BitWord::truncating(golden, fmt).value()).abs();
    if d.is_finite() {
        d
    } else {
        f64::INFINITY
    }
}

/// One report per BER. Block `b` always draws its values and fault
/// candidates from stream `(seed, b)`, so faults are nested across BERs.
pub fn run_ber_proxy(
    scheme: &Scheme,
    reference: Option<&RangeMap>,
    bers: &[f64],
    cfg: &ProxyConfig,
) -> Result<Vec<ProxyReport>, HarnessError> {
    let fmt = cfg.format;
    let vpb = values_per_block(fmt);
    if cfg.values == 0 || cfg.values % vpb != 0 {
        return Err(HarnessError::Invalid(format!("tensor size {} is not a positive multiple of {vpb} values", cfg.values)));
    }
    let dist = ValueDist::Gaussian { sigma: cfg.sigma };
    dist.validate()?;
    let reference = reference.or(scheme.map());
    if let Some(m) = reference {
        if m.format() != fmt {
            return Err(HarnessError::Invalid(format!("map format {} differs from tensor format {fmt}", m.format())));
        }
    }
    let blocks = cfg.values / vpb;
    let width = fmt.total_bits;
    let mut out = Vec::with_capacity(bers.len());

    for &ber in bers {
        let mixture = BerMixture::new(ber, cfg.region)?;
        let run_block = |b: usize, p: &mut Partial| {
            let mut rng = trial_rng(cfg.seed, b as u64);
            let data = dist.populate(fmt, &mut rng);
            let events = mixture.sample_block(&mut rng);
            let stored = scheme.encode(&data);
            if events.is_empty() {
                p.counts[Outcome::NoError.index()] += 1;
                return;
            }
            p.faulted += 1;
            let mut mask = [0u64; 5];
            for e in &events {
                let slot = MIXTURE.iter().position(|(m, _, _)| *m == e.mode).expect("mixture mode");
                p.modes[slot] += 1;
                xor_into(&mut mask, &e.mask);
            }
            p.flipped += popcount(&mask) as u64;
            let mut read = stored;
            read.apply_mask(&mask);
            let res: DecodeResult = scheme.decode(&read);
            p.counts[scheme.classify(&stored.data, &res, true).index()] += 1;
            for i in 0..vpb {
                let (g, r) = (get_value(&stored.data, width, i), get_value(&res.data, width, i));
                let d = deviation(g, r, fmt);
                if d.is_infinite() {
                    p.nonfinite += 1;
                }
                p.sum_dev += d;
                p.max_dev = p.max_dev.max(d);
                if let Some(m) = reference {
                    if g != r && m.rid_of_raw(g) != m.rid_of_raw(r) {
                        p.out_of_range += 1;
                    }
                }
            }
        };
        let partials: Vec<Partial> = (0..blocks.div_ceil(BLOCK_CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut p = Partial::default();
                for b in c * BLOCK_CHUNK..((c + 1) * BLOCK_CHUNK).min(blocks) {
                    run_block(b, &mut p);
                }
                p
            })
            .collect();
        let mut t = Partial::default();
        for p in &partials {
            t.faulted += p.faulted;
            for i in 0..4 {
                t.modes[i] += p.modes[i];
            }
            t.flipped += p.flipped;
            for i in 0..5 {
                t.counts[i] += p.counts[i];
            }
            t.sum_dev += p.sum_dev;
            t.max_dev = t.max_dev.max(p.max_dev);
            t.nonfinite += p.nonfinite;
            t.out_of_range += p.out_of_range;
        }
        out.push(ProxyReport {
            scheme: scheme.kind(),
            ber,
            values: cfg.values as u64,
            blocks: blocks as u64,
            faulted_blocks: t.faulted,
            mode_events: t.modes,
            flipped_bits: t.flipped,
            measured_ber: t.flipped as f64 / (blocks as f64 * mixture.scope_bits() as f64),
            counts: t.counts,
            mae: t.sum_dev / cfg.values as f64,
            max_abs_dev: t.max_dev,
            nonfinite_values: t.nonfinite,
            frac_out_of_range: reference.map_or(f64::NAN, |_| t.out_of_range as f64 / cfg.values as f64),
            max_range_width: reference.map_or(f64::NAN, |m| m.max_finite_width()),
        });
    }
    Ok(out)
}

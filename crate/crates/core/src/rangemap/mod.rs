//! RangeMaps: ordered partitions of a format's value domain into ranges, each
//! with a representative and a range identifier (RID).
//!
//! Exponent maps (`MapKind::SimpleExponent`) partition the exponent field and
//! describe magnitudes; the sign of a substituted value comes from the stored
//! word. Value maps (`Ideal`, `LloydMax`) partition the signed real line.

mod ideal;
mod lloydmax;
mod pmf;
mod simple;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitnum::{encode_value, exp2i, BitWord, FormatKind, NumFormat};

pub use ideal::{build_ideal_map, ideal_gaussian_solution, IdealSolution};
pub use lloydmax::{build_lloydmax_map, LloydMaxReport};
pub use pmf::{standard_normal_cdf, standard_normal_quantile, ExponentPmf};
pub use simple::{build_simple_map, optimal_partition, Partition};

pub const MAP_FILE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RangeMapError {
    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("range count {got} outside [{min}, {max}]")]
    RangeCount { got: usize, min: usize, max: usize },
    #[error("invalid range map: {0}")]
    Invalid(String),
    #[error("rid {0} is not defined by this map")]
    UnknownRid(u32),
    #[error("{0} maps are only defined for floating-point formats")]
    NotApplicable(&'static str),
    #[error("no convergence after {0} iterations")]
    NonConvergence(usize),
    #[error("need at least {needed} distinct finite samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("unsupported map file version {0}")]
    Version(u32),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Ideal,
    #[serde(rename = "simple")]
    SimpleExponent,
    LloydMax,
}

impl MapKind {
    pub fn is_exponent(&self) -> bool {
        matches!(self, MapKind::SimpleExponent)
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MapKind::Ideal => "ideal",
            MapKind::SimpleExponent => "simple",
            MapKind::LloydMax => "lloydmax",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Interval {
    /// Inclusive exponent-field range.
    Exponent { lo: u32, hi: u32 },
    /// Half-open value range `[lo, hi)`; the outer bounds are infinite.
    Value { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeEntry {
    pub interval: Interval,
    pub rep_bits: u32,
    pub rid: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MapFile", into = "MapFile")]
pub struct RangeMap {
    format: NumFormat,
    kind: MapKind,
    sigma: f64,
    rid_bits: u32,
    entries: Vec<RangeEntry>,
    /// RID per exponent field (exponent maps) or per raw word (value maps on
    /// formats up to 16 bits); empty otherwise.
    lut: Vec<u8>,
}

pub enum MaeSource<'a> {
    /// Exponent-level objective `sum_e P(e) |f(e) - f(e_hat)|`.
    Pmf(&'a ExponentPmf),
    /// Mean `|x - q(x)|` over real samples, each first rounded into the format.
    Samples(&'a [f64]),
    /// `E|X - q(X)|` for `X ~ N(0, sigma^2)`, in closed form (value maps).
    Gaussian(f64),
}

/// Smallest RID width that can index `count` entries.
pub fn rid_bits_for(count: usize) -> u32 {
    (usize::BITS - (count.max(2) - 1).leading_zeros()).max(1)
}

impl RangeMap {
    pub fn new(
        format: NumFormat,
        kind: MapKind,
        sigma: f64,
        rid_bits: u32,
        entries: Vec<RangeEntry>,
    ) -> Result<Self, RangeMapError> {
        let invalid = |m: String| Err(RangeMapError::Invalid(m));
        if !(1..=8).contains(&rid_bits) {
            return invalid(format!("rid_bits {rid_bits} outside 1..=8"));
        }
        if entries.is_empty() || entries.len() > 1 << rid_bits {
            return invalid(format!("{} entries do not fit {rid_bits}-bit RIDs", entries.len()));
        }
        if kind.is_exponent() && format.kind != FormatKind::Float {
            return Err(RangeMapError::NotApplicable("exponent"));
        }
        let last = entries.len() - 1;
        for (i, e) in entries.iter().enumerate() {
            if e.rid != i as u32 {
                return invalid(format!("entry {i} has rid {}; rids must follow range order", e.rid));
            }
            if e.rep_bits > format.word_mask() {
                return invalid(format!("entry {i} representative does not fit {format}"));
            }
            let rep = BitWord::truncating(e.rep_bits, format);
            match (kind.is_exponent(), e.interval) {
                (true, Interval::Exponent { lo, hi }) => {
                    let expected_lo = if i == 0 { 0 } else { prev_hi(&entries[i - 1]) + 1 };
                    if lo != expected_lo || hi < lo {
                        return invalid(format!("entry {i} [{lo}, {hi}] breaks contiguity"));
                    }
                    if i == last && hi != format.max_exponent_field() {
                        return invalid(format!("last entry must end at exponent {}", format.max_exponent_field()));
                    }
                    if rep.sign() != 0 || !(lo..=hi).contains(&rep.exponent_field()) {
                        return invalid(format!("entry {i} representative lies outside its range"));
                    }
                }
                (false, Interval::Value { lo, hi }) => {
                    let expected_lo = if i == 0 { f64::NEG_INFINITY } else { prev_hi_value(&entries[i - 1]) };
                    if lo.to_bits() != expected_lo.to_bits() || !(lo < hi) || hi.is_nan() {
                        return invalid(format!("entry {i} [{lo}, {hi}) breaks contiguity"));
                    }
                    if (i == last) != (hi == f64::INFINITY) {
                        return invalid("only the last value range may be unbounded above".into());
                    }
                    let v = rep.value();
                    if !(lo <= v && v < hi) {
                        return invalid(format!("entry {i} representative {v} lies outside [{lo}, {hi})"));
                    }
                }
                _ => return invalid(format!("entry {i} interval does not match map kind {kind}")),
            }
        }
        let sigma_ok = if kind == MapKind::LloydMax { sigma >= 0.0 && sigma.is_finite() } else { sigma > 0.0 && sigma.is_finite() };
        if !sigma_ok {
            return Err(RangeMapError::InvalidSigma(sigma));
        }
        let mut map = Self { format, kind, sigma, rid_bits, entries, lut: Vec::new() };
        map.lut = map.build_lut();
        Ok(map)
    }

    fn build_lut(&self) -> Vec<u8> {
        if self.kind.is_exponent() {
            (0..=self.format.max_exponent_field()).map(|e| self.rid_of_exponent(e) as u8).collect()
        } else if self.format.total_bits <= 16 {
            (0..=self.format.word_mask())
                .map(|raw| self.rid_of_value(BitWord::truncating(raw, self.format).value()) as u8)
                .collect()
        } else {
            Vec::new()
        }
    }

    fn rid_of_exponent(&self, e: u32) -> u32 {
        self.entries
            .iter()
            .position(|en| matches!(en.interval, Interval::Exponent { hi, .. } if e <= hi))
            .unwrap_or(self.entries.len() - 1) as u32
    }

    fn rid_of_value(&self, v: f64) -> u32 {
        if v.is_nan() {
            return (self.entries.len() - 1) as u32;
        }
        self.entries.partition_point(|en| matches!(en.interval, Interval::Value { hi, .. } if hi <= v)) as u32
    }

    pub fn format(&self) -> NumFormat {
        self.format
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn rid_bits(&self) -> u32 {
        self.rid_bits
    }

    pub fn entries(&self) -> &[RangeEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// RID of a raw stored word of this map's format.
    #[inline]
    pub fn rid_of_raw(&self, raw: u32) -> u32 {
        let raw = raw & self.format.word_mask();
        if self.kind.is_exponent() {
            let e = raw >> self.format.mantissa_bits & self.format.max_exponent_field();
            self.lut[e as usize] as u32
        } else if !self.lut.is_empty() {
            self.lut[raw as usize] as u32
        } else {
            self.rid_of_value(BitWord::truncating(raw, self.format).value())
        }
    }

    pub fn map_value(&self, w: BitWord) -> u32 {
        debug_assert_eq!(w.format(), self.format);
        self.rid_of_raw(w.raw())
    }

    fn entry(&self, rid: u32) -> Result<&RangeEntry, RangeMapError> {
        self.entries.get(rid as usize).ok_or(RangeMapError::UnknownRid(rid))
    }

    pub fn representative(&self, rid: u32) -> Result<BitWord, RangeMapError> {
        Ok(BitWord::truncating(self.entry(rid)?.rep_bits, self.format))
    }

    /// Width of the range: for exponent ranges the magnitude span
    /// `2^(r+1-bias) - 2^(l-bias)`, with the lowest range reaching down to zero.
    pub fn range_width(&self, rid: u32) -> Result<f64, RangeMapError> {
        Ok(match self.entry(rid)?.interval {
            Interval::Exponent { lo, hi } => {
                let bias = self.format.exp_bias;
                let top = exp2i(hi as i32 + 1 - bias);
                let bottom = if lo == 0 { 0.0 } else { exp2i(lo as i32 - bias) };
                top - bottom
            }
            Interval::Value { lo, hi } => hi - lo,
        })
    }

    /// Largest finite range width, ignoring the unbounded tails of value maps.
    pub fn max_finite_width(&self) -> f64 {
        (0..self.len() as u32)
            .filter_map(|r| self.range_width(r).ok())
            .filter(|w| w.is_finite())
            .fold(0.0, f64::max)
    }

    /// Raw word written back for a value whose RID was repaired to `rid`.
    /// Exponent maps keep the sign bit of `stored`.
    #[inline]
    pub fn substitute(&self, stored: u32, rid: u32) -> Result<u32, RangeMapError> {
        let rep = self.entry(rid)?.rep_bits;
        Ok(if self.kind.is_exponent() {
            let sign = 1 << self.format.sign_bit();
            (stored & sign) | rep
        } else {
            rep
        })
    }

    /// Value `x` would be restored to if its range were repaired.
    pub fn quantize(&self, x: f64) -> f64 {
        let w = encode_value(x, self.format);
        let rid = self.rid_of_raw(w.raw());
        let raw = self.substitute(w.raw(), rid).expect("rid from lookup");
        BitWord::truncating(raw, self.format).value()
    }

    pub fn to_json(&self) -> Result<String, RangeMapError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, RangeMapError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), RangeMapError> {
        let mut s = self.to_json()?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RangeMapError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn prev_hi(e: &RangeEntry) -> u32 {
    match e.interval {
        Interval::Exponent { hi, .. } => hi,
        Interval::Value { .. } => u32::MAX - 1,
    }
}

fn prev_hi_value(e: &RangeEntry) -> f64 {
    match e.interval {
        Interval::Value { hi, .. } => hi,
        Interval::Exponent { .. } => f64::NAN,
    }
}

pub fn map_mae(map: &RangeMap, source: MaeSource<'_>) -> Result<f64, RangeMapError> {
    match source {
        MaeSource::Pmf(pmf) => {
            if !map.kind.is_exponent() {
                return Err(RangeMapError::NotApplicable("exponent-PMF"));
            }
            if pmf.format() != map.format {
                return Err(RangeMapError::Invalid(format!("PMF is over {}, map over {}", pmf.format(), map.format)));
            }
            let bias = map.format.exp_bias;
            let mut total = 0.0;
            for en in &map.entries {
                let Interval::Exponent { lo, hi } = en.interval else { unreachable!() };
                let rep_e = BitWord::truncating(en.rep_bits, map.format).exponent_field();
                let f_rep = exp2i(rep_e as i32 - bias);
                for e in lo..=hi {
                    total += pmf.prob(e) * (exp2i(e as i32 - bias) - f_rep).abs();
                }
            }
            Ok(total)
        }
        MaeSource::Gaussian(sigma) => {
            if map.kind.is_exponent() {
                return Err(RangeMapError::NotApplicable("closed-form Gaussian"));
            }
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(RangeMapError::InvalidSigma(sigma));
            }
            let pdf = |z: f64| if z.is_finite() { (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt() } else { 0.0 };
            // sigma * integral over [a, b] of |z - r| phi(z), split at r
            let one_sided = |a: f64, b: f64, r: f64| (pdf(a) - pdf(b)) - r * (standard_normal_cdf(b) - standard_normal_cdf(a));
            let mut total = 0.0;
            for en in &map.entries {
                let Interval::Value { lo, hi } = en.interval else { unreachable!() };
                let (a, b) = (lo / sigma, hi / sigma);
                let r = BitWord::truncating(en.rep_bits, map.format).value() / sigma;
                let m = r.clamp(a, b);
                total += one_sided(m, b, r) - one_sided(a, m, r);
            }
            Ok(sigma * total)
        }
        MaeSource::Samples(xs) => {
            if xs.is_empty() {
                return Err(RangeMapError::InsufficientSamples { needed: 1, got: 0 });
            }
            Ok(xs.iter().map(|&x| (x - map.quantize(x)).abs()).sum::<f64>() / xs.len() as f64)
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FileBound {
    Exponent(u32),
    Value(Option<f64>),
}

#[derive(Serialize, Deserialize)]
struct MapFile {
    version: u32,
    format: NumFormat,
    kind: MapKind,
    sigma: f64,
    rid_bits: u32,
    entries: Vec<(FileBound, FileBound, u32, u32)>,
}

impl From<RangeMap> for MapFile {
    fn from(m: RangeMap) -> Self {
        let bound = |v: f64| FileBound::Value(v.is_finite().then_some(v));
        let entries = m
            .entries
            .iter()
            .map(|e| match e.interval {
                Interval::Exponent { lo, hi } => (FileBound::Exponent(lo), FileBound::Exponent(hi), e.rep_bits, e.rid),
                Interval::Value { lo, hi } => (bound(lo), bound(hi), e.rep_bits, e.rid),
            })
            .collect();
        MapFile { version: MAP_FILE_VERSION, format: m.format, kind: m.kind, sigma: m.sigma, rid_bits: m.rid_bits, entries }
    }
}

impl TryFrom<MapFile> for RangeMap {
    type Error = RangeMapError;

    fn try_from(f: MapFile) -> Result<Self, Self::Error> {
        if f.version != MAP_FILE_VERSION {
            return Err(RangeMapError::Version(f.version));
        }
        let n = f.entries.len();
        let mut entries = Vec::with_capacity(n);
        for (i, (lo, hi, rep_bits, rid)) in f.entries.into_iter().enumerate() {
            let interval = if f.kind.is_exponent() {
                match (lo, hi) {
                    (FileBound::Exponent(lo), FileBound::Exponent(hi)) => Interval::Exponent { lo, hi },
                    _ => return Err(RangeMapError::Invalid(format!("entry {i}: exponent bounds must be integers"))),
                }
            } else {
                let value = |b: FileBound, inf: f64| match b {
                    FileBound::Value(Some(v)) => v,
                    FileBound::Value(None) => inf,
                    FileBound::Exponent(v) => v as f64,
                };
                let lo = value(lo, f64::NEG_INFINITY);
                let hi = value(hi, f64::INFINITY);
                if (i == 0 && lo.is_finite()) || (i + 1 == n && hi.is_finite()) {
                    return Err(RangeMapError::Invalid("outer value bounds must be null".into()));
                }
                Interval::Value { lo, hi }
            };
            entries.push(RangeEntry { interval, rep_bits, rid });
        }
        RangeMap::new(f.format, f.kind, f.sigma, f.rid_bits, entries)
    }
}

//! Protection schemes over a 256-bit data block with a 16-bit redundancy lane.
//!
//! Data is carried as four little-endian `u64` limbs. A value of width `w`
//! with index `i` occupies bits `[w*i, w*(i+1))`, so the 32-bit region `r`
//! holds values `r*vpr .. (r+1)*vpr` where `vpr = 32 / w`.

mod baseline;
mod rangeguard;
mod registry;
mod secded;
mod ssc8;
mod weight_nulling;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitnum::NumFormat;
use crate::rangemap::{RangeMap, RangeMapError};
use crate::rs::RsError;

pub use baseline::BaselineScheme;
pub use rangeguard::{RangeGuardScheme, RgCode};
pub use registry::{map_tag, with_map_tag, RegisteredSlot, RegistryConfig, SchemeRegistry, SlotConfig, MAP_TAG_SHIFT};
pub use secded::SecDedScheme;
pub use ssc8::Ssc8Scheme;
pub use weight_nulling::WeightNullingScheme;

pub type Data256 = [u64; 4];

/// The fault-visible stored image: data bits 0..256, redundancy lane 256..272.
pub type BitImage = [u64; 5];

pub const DATA_BITS: usize = 256;
pub const IMAGE_BITS: usize = 272;

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("invalid scheme configuration: {0}")]
    Config(String),
    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),
    #[error("map tag {0} has no registered scheme")]
    UnregisteredTag(u8),
    #[error(transparent)]
    RangeMap(#[from] RangeMapError),
    #[error(transparent)]
    Rs(#[from] RsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StoredBlock {
    pub data: Data256,
    pub redundancy: u16,
    /// On-die parity of the baseline stack; lives inside the device and is
    /// never part of the fault-visible image.
    pub ondie: u32,
}

impl StoredBlock {
    pub fn image(&self) -> BitImage {
        [self.data[0], self.data[1], self.data[2], self.data[3], self.redundancy as u64]
    }

    pub fn apply_mask(&mut self, mask: &BitImage) {
        for i in 0..4 {
            self.data[i] ^= mask[i];
        }
        self.redundancy ^= mask[4] as u16;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DecodeStatus {
    /// Nothing detected.
    Clean,
    /// The decoder changed something (bits, symbols or substituted values).
    Corrected,
    /// Detected but not corrected.
    Detected,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeResult {
    pub data: Data256,
    pub status: DecodeStatus,
    /// Bit `i` set when value `i` was replaced (by a representative or zero).
    pub substituted: u32,
}

impl DecodeResult {
    pub fn clean(data: Data256) -> Self {
        Self { data, status: DecodeStatus::Clean, substituted: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    NoError,
    #[serde(rename = "CE")]
    Ce,
    #[serde(rename = "BE")]
    Be,
    #[serde(rename = "DUE")]
    Due,
    #[serde(rename = "SDC")]
    Sdc,
}

impl Outcome {
    pub const ALL: [Outcome; 5] = [Outcome::NoError, Outcome::Ce, Outcome::Be, Outcome::Due, Outcome::Sdc];

    pub fn label(&self) -> &'static str {
        match self {
            Outcome::NoError => "NoError",
            Outcome::Ce => "CE",
            Outcome::Be => "BE",
            Outcome::Due => "DUE",
            Outcome::Sdc => "SDC",
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[inline]
pub fn get_value(data: &Data256, width: u32, index: usize) -> u32 {
    let bit = width as usize * index;
    let mask = if width == 32 { u32::MAX as u64 } else { (1u64 << width) - 1 };
    (data[bit / 64] >> (bit % 64) & mask) as u32
}

#[inline]
pub fn set_value(data: &mut Data256, width: u32, index: usize, raw: u32) {
    let bit = width as usize * index;
    let mask = if width == 32 { u32::MAX as u64 } else { (1u64 << width) - 1 };
    let limb = &mut data[bit / 64];
    *limb = (*limb & !(mask << (bit % 64))) | ((raw as u64 & mask) << (bit % 64));
}

pub fn values_per_block(format: NumFormat) -> usize {
    DATA_BITS / format.total_bits as usize
}

/// Packs raw values (lowest index first) into a block.
pub fn pack_values(format: NumFormat, raws: &[u32]) -> Data256 {
    assert_eq!(raws.len(), values_per_block(format));
    let mut d = [0u64; 4];
    for (i, &r) in raws.iter().enumerate() {
        set_value(&mut d, format.total_bits, i, r);
    }
    d
}

pub fn unpack_values(format: NumFormat, data: &Data256) -> Vec<u32> {
    (0..values_per_block(format)).map(|i| get_value(data, format.total_bits, i)).collect()
}

pub fn data_to_bytes(data: &Data256) -> [u8; 32] {
    let mut out = [0u8; 32];
    for (i, limb) in data.iter().enumerate() {
        out[8 * i..8 * i + 8].copy_from_slice(&limb.to_le_bytes());
    }
    out
}

pub fn data_from_bytes(bytes: &[u8; 32]) -> Data256 {
    let mut d = [0u64; 4];
    for (i, limb) in d.iter_mut().enumerate() {
        *limb = u64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().unwrap());
    }
    d
}

/// Every value has the same RID under `map`.
pub fn rid_equivalent(a: &Data256, b: &Data256, map: &RangeMap) -> bool {
    let w = map.format().total_bits;
    (0..DATA_BITS / w as usize).all(|i| {
        let (x, y) = (get_value(a, w, i), get_value(b, w, i));
        x == y || map.rid_of_raw(x) == map.rid_of_raw(y)
    })
}

/// Substituted values (bit i of `substituted`) whose magnitude moved by more
/// than the width of the golden value's range. Values the decoder left alone
/// are not covered: an in-range flip keeps its RID and passes through.
pub fn bound_violations(golden: &Data256, repaired: &Data256, substituted: u32, map: &RangeMap) -> Vec<usize> {
    let fmt = map.format();
    let w = fmt.total_bits;
    (0..DATA_BITS / w as usize)
        .filter(|&i| {
            if substituted & (1 << i) == 0 {
                return false;
            }
            let (g, r) = (get_value(golden, w, i), get_value(repaired, w, i));
            if g == r {
                return false;
            }
            let gv = crate::bitnum::BitWord::truncating(g, fmt).value();
            let rv = crate::bitnum::BitWord::truncating(r, fmt).value();
            let width = map.range_width(map.rid_of_raw(g)).expect("rid from lookup");
            !((rv.abs() - gv.abs()).abs() <= width)
        })
        .collect()
}

/// Outcome of one protected read, judged against the golden payload.
pub fn classify(golden: &Data256, result: &DecodeResult, injected: bool, map: Option<&RangeMap>) -> Outcome {
    if result.status == DecodeStatus::Detected {
        return Outcome::Due;
    }
    if result.data == *golden {
        return if injected { Outcome::Ce } else { Outcome::NoError };
    }
    match map {
        Some(m) if rid_equivalent(golden, &result.data, m) => Outcome::Be,
        _ => Outcome::Sdc,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeKind {
    #[serde(rename = "rg-ssc8")]
    RgSsc8,
    #[serde(rename = "rg-dsc4")]
    RgDsc4,
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "secded")]
    SecDed,
    #[serde(rename = "ssc8")]
    Ssc8,
    #[serde(rename = "weight-nulling")]
    WeightNulling,
    #[serde(rename = "none")]
    Unprotected,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 7] = [
        SchemeKind::RgSsc8,
        SchemeKind::RgDsc4,
        SchemeKind::Baseline,
        SchemeKind::SecDed,
        SchemeKind::Ssc8,
        SchemeKind::WeightNulling,
        SchemeKind::Unprotected,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::RgSsc8 => "rg-ssc8",
            SchemeKind::RgDsc4 => "rg-dsc4",
            SchemeKind::Baseline => "baseline",
            SchemeKind::SecDed => "secded",
            SchemeKind::Ssc8 => "ssc8",
            SchemeKind::WeightNulling => "weight-nulling",
            SchemeKind::Unprotected => "none",
        }
    }

    pub fn from_name(s: &str) -> Result<Self, SchemeError> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SchemeError::UnknownScheme(s.to_string()))
    }

    pub fn is_rangeguard(&self) -> bool {
        matches!(self, SchemeKind::RgSsc8 | SchemeKind::RgDsc4)
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub enum Scheme {
    RangeGuard(RangeGuardScheme),
    Baseline(BaselineScheme),
    SecDed(SecDedScheme),
    Ssc8(Ssc8Scheme),
    WeightNulling(WeightNullingScheme),
    Unprotected(NumFormat),
}

impl Scheme {
    /// Builds a scheme; RangeGuard kinds need a map, the others ignore it.
    pub fn build(
        kind: SchemeKind,
        format: NumFormat,
        map: Option<Arc<RangeMap>>,
        rid_bits: Option<u32>,
    ) -> Result<Self, SchemeError> {
        Ok(match kind {
            SchemeKind::RgSsc8 | SchemeKind::RgDsc4 => {
                let map = map.ok_or_else(|| SchemeError::Config(format!("{kind} needs a range map")))?;
                if map.format() != format {
                    return Err(SchemeError::Config(format!("map is over {}, block over {format}", map.format())));
                }
                let code = if kind == SchemeKind::RgSsc8 { RgCode::Ssc8 } else { RgCode::Dsc4 };
                Scheme::RangeGuard(RangeGuardScheme::new(code, map, rid_bits)?)
            }
            SchemeKind::Baseline => Scheme::Baseline(BaselineScheme::new()),
            SchemeKind::SecDed => Scheme::SecDed(SecDedScheme::shared()),
            SchemeKind::Ssc8 => Scheme::Ssc8(Ssc8Scheme::new()),
            SchemeKind::WeightNulling => Scheme::WeightNulling(WeightNullingScheme::new(format)?),
            SchemeKind::Unprotected => Scheme::Unprotected(format),
        })
    }

    pub fn kind(&self) -> SchemeKind {
        match self {
            Scheme::RangeGuard(s) => match s.code() {
                RgCode::Ssc8 => SchemeKind::RgSsc8,
                RgCode::Dsc4 => SchemeKind::RgDsc4,
            },
            Scheme::Baseline(_) => SchemeKind::Baseline,
            Scheme::SecDed(_) => SchemeKind::SecDed,
            Scheme::Ssc8(_) => SchemeKind::Ssc8,
            Scheme::WeightNulling(_) => SchemeKind::WeightNulling,
            Scheme::Unprotected(_) => SchemeKind::Unprotected,
        }
    }

    pub fn map(&self) -> Option<&RangeMap> {
        match self {
            Scheme::RangeGuard(s) => Some(s.map()),
            _ => None,
        }
    }

    pub fn encode(&self, data: &Data256) -> StoredBlock {
        match self {
            Scheme::RangeGuard(s) => s.encode(data),
            Scheme::Baseline(s) => s.encode(data),
            Scheme::SecDed(s) => s.encode(data),
            Scheme::Ssc8(s) => s.encode(data),
            Scheme::WeightNulling(s) => s.encode(data),
            Scheme::Unprotected(_) => StoredBlock { data: *data, redundancy: 0, ondie: 0 },
        }
    }

    pub fn decode(&self, stored: &StoredBlock) -> DecodeResult {
        match self {
            Scheme::RangeGuard(s) => s.decode(stored),
            Scheme::Baseline(s) => s.decode(stored),
            Scheme::SecDed(s) => s.decode(stored),
            Scheme::Ssc8(s) => s.decode(stored),
            Scheme::WeightNulling(s) => s.decode(stored),
            Scheme::Unprotected(_) => DecodeResult::clean(stored.data),
        }
    }

    /// `golden` is the payload as stored (`encode(..).data`).
    pub fn classify(&self, golden: &Data256, result: &DecodeResult, injected: bool) -> Outcome {
        classify(golden, result, injected, self.map())
    }
}

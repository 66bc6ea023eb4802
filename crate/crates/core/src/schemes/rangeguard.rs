use std::sync::Arc;

use super::{get_value, set_value, Data256, DecodeResult, DecodeStatus, SchemeError, StoredBlock};
use crate::rangemap::RangeMap;
use crate::rs::RsCode;

const REGIONS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RgCode {
    /// RS(10,8) over GF(256): one corrupted RID symbol.
    Ssc8,
    /// RS(12,8) over GF(16): up to two corrupted RID symbols.
    Dsc4,
}

impl RgCode {
    pub fn symbol_bits(&self) -> u32 {
        match self {
            RgCode::Ssc8 => 8,
            RgCode::Dsc4 => 4,
        }
    }

    fn rs(&self) -> RsCode {
        match self {
            RgCode::Ssc8 => RsCode::standard(8, 10, 8),
            RgCode::Dsc4 => RsCode::standard(4, 12, 8),
        }
        .expect("fixed code parameters are valid")
    }
}

/// RIDs of each 32-bit region are packed into one RS data symbol; the
/// 16-bit lane holds the parity symbols. Only data and parity are stored.
#[derive(Debug, Clone)]
pub struct RangeGuardScheme {
    code: RgCode,
    rs: RsCode,
    map: Arc<RangeMap>,
    width: u32,
    values_per_region: usize,
    /// RID bits per value inside a symbol.
    slot_bits: u32,
}

impl RangeGuardScheme {
    /// `rid_bits` overrides the per-value slot width; by default a 32-bit value
    /// uses the map's RID width and narrower values split the symbol evenly.
    pub fn new(code: RgCode, map: Arc<RangeMap>, rid_bits: Option<u32>) -> Result<Self, SchemeError> {
        let width = map.format().total_bits;
        let vpr = (32 / width) as usize;
        let sym = code.symbol_bits();
        let slot_bits = rid_bits.unwrap_or(if vpr == 1 { map.rid_bits().min(sym) } else { sym / vpr as u32 });
        if slot_bits == 0 || slot_bits * vpr as u32 > sym {
            return Err(SchemeError::Config(format!(
                "{vpr} RIDs of {slot_bits} bits do not fit a {sym}-bit symbol"
            )));
        }
        if map.len() > 1 << slot_bits {
            return Err(SchemeError::Config(format!(
                "map has {} entries but RID slots are {slot_bits} bits",
                map.len()
            )));
        }
        Ok(Self { code, rs: code.rs(), map, width, values_per_region: vpr, slot_bits })
    }

    pub fn code(&self) -> RgCode {
        self.code
    }

    pub fn map(&self) -> &RangeMap {
        &self.map
    }

    pub fn slot_bits(&self) -> u32 {
        self.slot_bits
    }

    pub fn rs(&self) -> &RsCode {
        &self.rs
    }

    /// One symbol per 32-bit region: value `vpr*r` in the highest used slot,
    /// unused high bits zero.
    pub fn rid_symbols(&self, data: &Data256) -> [u16; REGIONS] {
        let mut syms = [0u16; REGIONS];
        for (r, s) in syms.iter_mut().enumerate() {
            let mut acc = 0u16;
            for j in 0..self.values_per_region {
                let raw = get_value(data, self.width, r * self.values_per_region + j);
                acc = acc << self.slot_bits | self.map.rid_of_raw(raw) as u16;
            }
            *s = acc;
        }
        syms
    }

    fn parity_to_lane(&self, parity: &[u16]) -> u16 {
        let m = self.code.symbol_bits();
        parity.iter().enumerate().fold(0, |lane, (j, &p)| lane | p << (j as u32 * m))
    }

    fn lane_to_parity(&self, lane: u16, out: &mut [u16]) {
        let m = self.code.symbol_bits();
        let mask = (1u16 << m) - 1;
        for (j, p) in out.iter_mut().enumerate() {
            *p = lane >> (j as u32 * m) & mask;
        }
    }

    /// RS symbols (regenerated RID symbols and parity) that differ between two
    /// stored blocks.
    pub fn symbol_errors(&self, golden: &StoredBlock, read: &StoredBlock) -> usize {
        let (a, b) = (self.rid_symbols(&golden.data), self.rid_symbols(&read.data));
        let np = self.rs.parity_len();
        let (mut pa, mut pb) = ([0u16; 4], [0u16; 4]);
        self.lane_to_parity(golden.redundancy, &mut pa[..np]);
        self.lane_to_parity(read.redundancy, &mut pb[..np]);
        a.iter().zip(&b).filter(|(x, y)| x != y).count() + pa[..np].iter().zip(&pb[..np]).filter(|(x, y)| x != y).count()
    }

    pub fn encode(&self, data: &Data256) -> StoredBlock {
        let syms = self.rid_symbols(data);
        let mut parity = [0u16; 4];
        let np = self.rs.parity_len();
        self.rs.encode_into(&syms, &mut parity[..np]);
        StoredBlock { data: *data, redundancy: self.parity_to_lane(&parity[..np]), ondie: 0 }
    }

    pub fn decode(&self, stored: &StoredBlock) -> DecodeResult {
        let syms = self.rid_symbols(&stored.data);
        let np = self.rs.parity_len();
        let mut word = [0u16; 12];
        word[..REGIONS].copy_from_slice(&syms);
        self.lane_to_parity(stored.redundancy, &mut word[REGIONS..REGIONS + np]);
        let word = &word[..REGIONS + np];

        let res = self.rs.decode_unchecked(word);
        if !res.is_corrected() {
            return DecodeResult { data: stored.data, status: DecodeStatus::Detected, substituted: 0 };
        }
        if res.error_positions.is_empty() {
            return DecodeResult::clean(stored.data);
        }

        let used = self.slot_bits * self.values_per_region as u32;
        let slot_mask = (1u16 << self.slot_bits) - 1;
        let mut data = stored.data;
        let mut substituted = 0u32;
        for &pos in &res.error_positions {
            if pos >= REGIONS {
                continue;
            }
            let fixed = res.corrected_word[pos];
            if used < 16 && fixed >> used != 0 {
                return DecodeResult { data: stored.data, status: DecodeStatus::Detected, substituted: 0 };
            }
            for j in 0..self.values_per_region {
                let shift = self.slot_bits * (self.values_per_region - 1 - j) as u32;
                let (old, new) = (syms[pos] >> shift & slot_mask, fixed >> shift & slot_mask);
                if old == new {
                    continue;
                }
                if new as usize >= self.map.len() {
                    return DecodeResult { data: stored.data, status: DecodeStatus::Detected, substituted: 0 };
                }
                let idx = pos * self.values_per_region + j;
                let raw = get_value(&data, self.width, idx);
                let rep = self.map.substitute(raw, new as u32).expect("rid checked against map length");
                set_value(&mut data, self.width, idx, rep);
                substituted |= 1 << idx;
            }
        }
        DecodeResult { data, status: DecodeStatus::Corrected, substituted }
    }
}

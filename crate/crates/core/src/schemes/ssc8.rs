use super::{data_to_bytes, Data256, DecodeResult, DecodeStatus, StoredBlock};
use crate::rs::RsCode;

/// RS(34,32) over bytes: the 32 data bytes followed by two parity bytes in
/// the redundancy lane (low byte first). Corrects one byte symbol.
#[derive(Debug, Clone)]
pub struct Ssc8Scheme {
    rs: RsCode,
}

impl Default for Ssc8Scheme {
    fn default() -> Self {
        Self::new()
    }
}

impl Ssc8Scheme {
    pub fn new() -> Self {
        Self { rs: RsCode::standard(8, 34, 32).expect("RS(34,32) over GF(256)") }
    }

    pub fn rs(&self) -> &RsCode {
        &self.rs
    }

    fn word(stored: &StoredBlock) -> [u16; 34] {
        let mut w = [0u16; 34];
        for (s, b) in w.iter_mut().zip(data_to_bytes(&stored.data)) {
            *s = b as u16;
        }
        w[32] = stored.redundancy & 0xFF;
        w[33] = stored.redundancy >> 8;
        w
    }

    pub fn encode(&self, data: &Data256) -> StoredBlock {
        let bytes = data_to_bytes(data);
        let syms: Vec<u16> = bytes.iter().map(|&b| b as u16).collect();
        let mut parity = [0u16; 2];
        self.rs.encode_into(&syms, &mut parity);
        StoredBlock { data: *data, redundancy: parity[0] | parity[1] << 8, ondie: 0 }
    }

    pub fn decode(&self, stored: &StoredBlock) -> DecodeResult {
        let res = self.rs.decode_unchecked(&Self::word(stored));
        if !res.is_corrected() {
            return DecodeResult { data: stored.data, status: DecodeStatus::Detected, substituted: 0 };
        }
        if res.error_positions.is_empty() {
            return DecodeResult::clean(stored.data);
        }
        let mut data = stored.data;
        for (&p, &m) in res.error_positions.iter().zip(&res.error_magnitudes) {
            if p < 32 {
                data[p / 8] ^= (m as u64) << (8 * (p % 8));
            }
        }
        DecodeResult { data, status: DecodeStatus::Corrected, substituted: 0 }
    }
}

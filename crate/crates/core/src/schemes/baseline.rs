use crc::{Crc, CRC_16_IBM_3740};

use super::{data_to_bytes, Data256, DecodeResult, DecodeStatus, StoredBlock};
use crate::rs::RsCode;

const CRC16: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);

pub fn crc16(data: &Data256) -> u16 {
    CRC16.checksum(&data_to_bytes(data))
}

/// On-die RS(19,17) over 16-bit symbols (sixteen data words plus the CRC
/// word) beneath a system-side CRC-16 over the 256 data bits.
///
/// The CRC word sits in the redundancy lane; the two on-die parity symbols
/// stay inside the device.
#[derive(Debug, Clone)]
pub struct BaselineScheme {
    oecc: RsCode,
}

impl Default for BaselineScheme {
    fn default() -> Self {
        Self::new()
    }
}

impl BaselineScheme {
    pub fn new() -> Self {
        Self { oecc: RsCode::standard(16, 19, 17).expect("RS(19,17) over GF(2^16)") }
    }

    fn symbols(data: &Data256, crc: u16) -> [u16; 17] {
        let mut s = [0u16; 17];
        for (i, sym) in s.iter_mut().take(16).enumerate() {
            *sym = (data[i / 4] >> (16 * (i % 4))) as u16;
        }
        s[16] = crc;
        s
    }

    pub fn encode(&self, data: &Data256) -> StoredBlock {
        let crc = crc16(data);
        let mut parity = [0u16; 2];
        self.oecc.encode_into(&Self::symbols(data, crc), &mut parity);
        StoredBlock { data: *data, redundancy: crc, ondie: parity[0] as u32 | (parity[1] as u32) << 16 }
    }

    pub fn decode(&self, stored: &StoredBlock) -> DecodeResult {
        let mut word = [0u16; 19];
        word[..17].copy_from_slice(&Self::symbols(&stored.data, stored.redundancy));
        word[17] = stored.ondie as u16;
        word[18] = (stored.ondie >> 16) as u16;
        let res = self.oecc.decode_unchecked(&word);

        // An uncorrectable on-die word is forwarded raw; the CRC decides.
        let (data, crc, oecc_fixed) = if res.is_corrected() && !res.error_positions.is_empty() {
            let w = &res.corrected_word;
            let mut d = [0u64; 4];
            for i in 0..16 {
                d[i / 4] |= (w[i] as u64) << (16 * (i % 4));
            }
            (d, w[16], true)
        } else {
            (stored.data, stored.redundancy, false)
        };
        let status = if crc16(&data) != crc {
            DecodeStatus::Detected
        } else if oecc_fixed {
            DecodeStatus::Corrected
        } else {
            DecodeStatus::Clean
        };
        DecodeResult { data, status, substituted: 0 }
    }
}

use super::{get_value, set_value, values_per_block, Data256, DecodeResult, DecodeStatus, SchemeError, StoredBlock};
use crate::bitnum::NumFormat;

/// One even-parity bit per value, stored in the value's least significant
/// bit. A mismatching value is replaced by zero and the read is flagged.
#[derive(Debug, Clone)]
pub struct WeightNullingScheme {
    format: NumFormat,
}

impl WeightNullingScheme {
    pub fn new(format: NumFormat) -> Result<Self, SchemeError> {
        if !format.is_float() {
            return Err(SchemeError::Config(format!("weight nulling needs a float format, got {format}")));
        }
        Ok(Self { format })
    }

    pub fn format(&self) -> NumFormat {
        self.format
    }

    /// The value with its LSB replaced by the parity of the remaining bits.
    pub fn with_parity(raw: u32) -> u32 {
        let body = raw & !1;
        body | (body.count_ones() & 1)
    }

    pub fn encode(&self, data: &Data256) -> StoredBlock {
        let w = self.format.total_bits;
        let mut out = *data;
        for i in 0..values_per_block(self.format) {
            set_value(&mut out, w, i, Self::with_parity(get_value(data, w, i)));
        }
        StoredBlock { data: out, redundancy: 0, ondie: 0 }
    }

    pub fn decode(&self, stored: &StoredBlock) -> DecodeResult {
        let w = self.format.total_bits;
        let mut data = stored.data;
        let mut substituted = 0u32;
        for i in 0..values_per_block(self.format) {
            if get_value(&data, w, i).count_ones() & 1 == 1 {
                set_value(&mut data, w, i, 0);
                substituted |= 1 << i;
            }
        }
        let status = if substituted == 0 { DecodeStatus::Clean } else { DecodeStatus::Detected };
        DecodeResult { data, status, substituted }
    }
}

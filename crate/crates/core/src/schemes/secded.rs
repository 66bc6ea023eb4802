use std::sync::{Arc, OnceLock};

use super::{Data256, DecodeResult, DecodeStatus, StoredBlock};

const NONE: u16 = u16::MAX;

/// (272,256) Hsiao SEC-DED: every data column has weight 3, the sixteen
/// check columns are unit vectors stored in the redundancy lane.
#[derive(Debug)]
pub struct SecDedTables {
    columns: [u16; 256],
    /// Syndrome contribution of each data byte value, per byte position.
    byte_syndrome: Vec<[u16; 256]>,
    /// Error position (0..272) per syndrome, `NONE` if uncorrectable.
    locate: Vec<u16>,
}

#[derive(Debug, Clone)]
pub struct SecDedScheme {
    tables: Arc<SecDedTables>,
}

/// Distinct weight-3 columns with every row used exactly 48 times: the
/// first sixteen rotation classes of weight-3 words, each taken whole.
fn hsiao_columns() -> [u16; 256] {
    let mut seen = vec![false; 1 << 16];
    let mut cols = Vec::with_capacity(256);
    for c in (0..=u16::MAX).filter(|c| c.count_ones() == 3) {
        if cols.len() == 256 {
            break;
        }
        if seen[c as usize] {
            continue;
        }
        for r in 0..16 {
            let v = c.rotate_left(r);
            seen[v as usize] = true;
            cols.push(v);
        }
    }
    cols.try_into().expect("35 rotation classes of 16")
}

impl SecDedTables {
    fn build() -> Self {
        let columns = hsiao_columns();
        let mut byte_syndrome = vec![[0u16; 256]; 32];
        for (pos, table) in byte_syndrome.iter_mut().enumerate() {
            for v in 0..256usize {
                table[v] = (0..8).filter(|b| v >> b & 1 == 1).fold(0, |s, b| s ^ columns[8 * pos + b]);
            }
        }
        let mut locate = vec![NONE; 1 << 16];
        for (i, &c) in columns.iter().enumerate() {
            locate[c as usize] = i as u16;
        }
        for j in 0..16 {
            locate[1 << j] = 256 + j as u16;
        }
        Self { columns, byte_syndrome, locate }
    }

    pub fn columns(&self) -> &[u16; 256] {
        &self.columns
    }
}

impl SecDedScheme {
    pub fn shared() -> Self {
        static TABLES: OnceLock<Arc<SecDedTables>> = OnceLock::new();
        Self { tables: TABLES.get_or_init(|| Arc::new(SecDedTables::build())).clone() }
    }

    pub fn tables(&self) -> &SecDedTables {
        &self.tables
    }

    pub fn check_bits(&self, data: &Data256) -> u16 {
        let mut s = 0;
        for (i, limb) in data.iter().enumerate() {
            for (b, byte) in limb.to_le_bytes().iter().enumerate() {
                s ^= self.tables.byte_syndrome[8 * i + b][*byte as usize];
            }
        }
        s
    }

    /// Error position for a syndrome: data bit, `256 + j` for check bit `j`, or `None`.
    pub fn locate(&self, syndrome: u16) -> Option<usize> {
        match self.tables.locate[syndrome as usize] {
            NONE => None,
            p => Some(p as usize),
        }
    }

    pub fn encode(&self, data: &Data256) -> StoredBlock {
        StoredBlock { data: *data, redundancy: self.check_bits(data), ondie: 0 }
    }

    pub fn decode(&self, stored: &StoredBlock) -> DecodeResult {
        let syndrome = self.check_bits(&stored.data) ^ stored.redundancy;
        if syndrome == 0 {
            return DecodeResult::clean(stored.data);
        }
        match self.locate(syndrome) {
            Some(p) => {
                let mut data = stored.data;
                if p < 256 {
                    data[p / 64] ^= 1 << (p % 64);
                }
                DecodeResult { data, status: DecodeStatus::Corrected, substituted: 0 }
            }
            None => DecodeResult { data: stored.data, status: DecodeStatus::Detected, substituted: 0 },
        }
    }
}

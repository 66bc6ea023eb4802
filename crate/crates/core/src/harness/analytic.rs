//! Syndrome-counting detection rates and the Monte Carlo estimates they check.

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::Serialize;

use super::coverage::CHUNK;
use super::stats::{wilson, Z95};
use crate::faults::{popcount, trial_rng};
use crate::rs::RsCode;
use crate::schemes::{DecodeStatus, SecDedScheme, StoredBlock};

/// Syndromes that a (272,256) SEC-DED decoder does not flag: zero plus one
/// per correctable bit.
pub const SECDED_SILENT_SYNDROMES: u64 = 1 + 272;

/// Probability that a random error outside the correction set is flagged.
pub fn secded_detection_rate() -> f64 {
    1.0 - SECDED_SILENT_SYNDROMES as f64 / 65536.0
}

/// Same count for a length-`n` single-symbol-correcting RS code with two
/// parity symbols of `m` bits: zero plus `n * (2^m - 1)` correctable syndromes.
pub fn rs_ssc_detection_rate(n: usize, m: u32) -> f64 {
    let q = (1u64 << m) as f64;
    1.0 - (1.0 + n as f64 * (q - 1.0)) / (q * q)
}

/// Baseline 32E: exact correction needs one 16-bit half of the window
/// untouched (or both).
pub fn baseline_32e_ce_rate() -> f64 {
    let z = 2f64.powi(-16);
    2.0 * z * (1.0 - z) + z * z
}

/// Baseline FC: a uniformly random data+CRC error passes the CRC with
/// probability `2^-16`.
pub fn baseline_fc_sdc_rate() -> f64 {
    2f64.powi(-16)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionEstimate {
    pub trials: u64,
    pub detected: u64,
    pub rate: f64,
    pub ci: (f64, f64),
}

impl DetectionEstimate {
    fn new(trials: u64, detected: u64) -> Self {
        Self { trials, detected, rate: detected as f64 / trials as f64, ci: wilson(detected, trials, Z95) }
    }
}

fn count_parallel(trials: u64, f: impl Fn(u64) -> bool + Sync) -> u64 {
    (0..trials.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(trials)).filter(|&i| f(i)).count() as u64)
        .sum()
}

/// Uniform random 272-bit patterns of weight at least 3 against SEC-DED.
pub fn secded_detection_mc(trials: u64, seed: u64) -> DetectionEstimate {
    let s = SecDedScheme::shared();
    let clean = s.encode(&[0; 4]);
    let detected = count_parallel(trials, |i| {
        let mut rng = trial_rng(seed, i);
        let mask = loop {
            let mut m = [0u64; 5];
            for l in m.iter_mut() {
                *l = rng.next_u64();
            }
            m[4] &= 0xFFFF;
            if popcount(&m) >= 3 {
                break m;
            }
        };
        let mut read: StoredBlock = clean;
        read.apply_mask(&mask);
        s.decode(&read).status == DecodeStatus::Detected
    });
    DetectionEstimate::new(trials, detected)
}

/// Uniform random symbol errors with at least two nonzero symbols.
pub fn rs_detection_mc(code: &RsCode, trials: u64, seed: u64) -> DetectionEstimate {
    let bits = code.field().symbol_bits();
    let n = code.n();
    let detected = count_parallel(trials, |i| {
        let mut rng = trial_rng(seed, i);
        let mut word = vec![0u16; n];
        loop {
            for w in word.iter_mut() {
                *w = rng.random_range(0..(1u32 << bits)) as u16;
            }
            if word.iter().filter(|&&w| w != 0).count() >= 2 {
                break;
            }
        }
        // The all-zero word is a codeword, so the error pattern is the received word.
        !code.decode(&word).expect("length matches").is_corrected()
    });
    DetectionEstimate::new(trials, detected)
}

//! DRAM fault modes over the 272-bit stored image and the BER-driven mixture.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schemes::{BitImage, DATA_BITS, IMAGE_BITS};

#[derive(Debug, Error, PartialEq)]
pub enum FaultError {
    #[error("unknown fault mode `{0}`")]
    UnknownMode(String),
    #[error("scenario must list one or two fault modes, got `{0}`")]
    Scenario(String),
    #[error("BER {0} outside [0, 1e-2]")]
    BerOutOfRange(f64),
    #[error("mode {mode} probability {p} exceeds 1 at this BER")]
    Saturated { mode: FaultMode, p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaultMode {
    #[serde(rename = "SE")]
    Se,
    #[serde(rename = "DAE")]
    Dae,
    #[serde(rename = "16E")]
    E16,
    #[serde(rename = "32E")]
    E32,
    #[serde(rename = "FC")]
    Fc,
}

impl FaultMode {
    pub const ALL: [FaultMode; 5] = [FaultMode::Se, FaultMode::Dae, FaultMode::E16, FaultMode::E32, FaultMode::Fc];

    pub fn name(&self) -> &'static str {
        match self {
            FaultMode::Se => "SE",
            FaultMode::Dae => "DAE",
            FaultMode::E16 => "16E",
            FaultMode::E32 => "32E",
            FaultMode::Fc => "FC",
        }
    }

    pub fn boundary_bits(&self) -> u32 {
        match self {
            FaultMode::Se => 1,
            FaultMode::Dae => 2,
            FaultMode::E16 => 16,
            FaultMode::E32 => 32,
            FaultMode::Fc => IMAGE_BITS as u32,
        }
    }
}

impl fmt::Display for FaultMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FaultMode {
    type Err = FaultError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| FaultError::UnknownMode(t.to_string()))
    }
}

/// Which part of the image localized faults (all but FC) may strike.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    /// The 256 data bits.
    #[default]
    DataOnly,
    /// All 272 bits; windows must fit entirely inside.
    FullImage,
}

impl Region {
    pub fn bits(&self) -> u32 {
        match self {
            Region::DataOnly => DATA_BITS as u32,
            Region::FullImage => IMAGE_BITS as u32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DaePolicy {
    /// Each of the two bits flips with probability 1/2.
    #[default]
    HalfProbability,
    /// Both bits flip.
    BothBits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaultEvent {
    pub mode: FaultMode,
    pub start_bit: u32,
    pub mask: BitImage,
}

impl FaultEvent {
    pub fn popcount(&self) -> u32 {
        popcount(&self.mask)
    }
}

pub fn popcount(mask: &BitImage) -> u32 {
    mask.iter().map(|w| w.count_ones()).sum()
}

pub fn xor_into(acc: &mut BitImage, mask: &BitImage) {
    for (a, m) in acc.iter_mut().zip(mask) {
        *a ^= m;
    }
}

#[inline]
fn set_bit(mask: &mut BitImage, bit: u32) {
    mask[bit as usize / 64] |= 1 << (bit % 64);
}

/// Per-trial generator: the stream id is the trial index, so results do not
/// depend on scheduling.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Injector {
    pub region: Region,
    pub dae: DaePolicy,
}

impl Injector {
    pub fn new(region: Region, dae: DaePolicy) -> Self {
        Self { region, dae }
    }

    /// `width` random bits at `start`, each set with probability 1/2.
    fn half_window<R: RngCore + ?Sized>(mask: &mut BitImage, start: u32, width: u32, rng: &mut R) {
        let bits = rng.next_u64() & if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
        let (limb, off) = (start as usize / 64, start % 64);
        mask[limb] |= bits << off;
        if off + width > 64 {
            mask[limb + 1] |= bits >> (64 - off);
        }
    }

    pub fn inject<R: RngCore + ?Sized>(&self, mode: FaultMode, rng: &mut R) -> FaultEvent {
        let scope = self.region.bits();
        let mut mask = [0u64; 5];
        let start = match mode {
            FaultMode::Se => {
                let b = rng.random_range(0..scope);
                set_bit(&mut mask, b);
                b
            }
            FaultMode::Dae => {
                let word = rng.random_range(0..scope / 16);
                let b = 16 * word + rng.random_range(0..15);
                match self.dae {
                    DaePolicy::BothBits => {
                        set_bit(&mut mask, b);
                        set_bit(&mut mask, b + 1);
                    }
                    DaePolicy::HalfProbability => Self::half_window(&mut mask, b, 2, rng),
                }
                b
            }
            FaultMode::E16 | FaultMode::E32 => {
                let w = mode.boundary_bits();
                let start = w * rng.random_range(0..scope / w);
                Self::half_window(&mut mask, start, w, rng);
                start
            }
            FaultMode::Fc => {
                for limb in mask.iter_mut() {
                    *limb = rng.next_u64();
                }
                mask[4] &= 0xFFFF;
                0
            }
        };
        FaultEvent { mode, start_bit: start, mask }
    }

    /// Independent events for every mode of the scenario, combined by XOR.
    pub fn inject_scenario<R: RngCore + ?Sized>(&self, scenario: &Scenario, rng: &mut R) -> (BitImage, Vec<FaultEvent>) {
        let events: Vec<FaultEvent> = scenario.modes.iter().map(|&m| self.inject(m, rng)).collect();
        let mut mask = [0u64; 5];
        for e in &events {
            xor_into(&mut mask, &e.mask);
        }
        (mask, events)
    }
}

/// One or two simultaneous fault modes, written `SE` or `SE+32E`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Scenario {
    pub modes: Vec<FaultMode>,
}

impl Scenario {
    pub fn single(mode: FaultMode) -> Self {
        Self { modes: vec![mode] }
    }

    pub fn double(a: FaultMode, b: FaultMode) -> Self {
        Self { modes: vec![a, b] }
    }

    pub fn name(&self) -> String {
        self.modes.iter().map(|m| m.name()).collect::<Vec<_>>().join("+")
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Scenario {
    type Err = FaultError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let modes = s.split('+').map(str::parse).collect::<Result<Vec<FaultMode>, _>>()?;
        if modes.is_empty() || modes.len() > 2 {
            return Err(FaultError::Scenario(s.to_string()));
        }
        Ok(Self { modes })
    }
}

impl Serialize for Scenario {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for Scenario {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Mixture components: (mode, share of BER, expected flipped bits per event).
pub const MIXTURE: [(FaultMode, f64, f64); 4] = [
    (FaultMode::Se, 0.009, 1.0),
    (FaultMode::Dae, 0.012, 2.0),
    (FaultMode::E16, 0.022, 8.0),
    (FaultMode::E32, 0.050, 16.0),
];

pub const MAX_BER: f64 = 1e-2;

/// Per-block fault process at a raw bit error rate.
///
/// Mode `m` strikes a block independently with probability
/// `p_m = ber * N * A_m / sum_j(A_j * B_j)`, where `N` is the bits in scope,
/// `A` the share and `B` the expected flipped bits, so the expected flipped
/// fraction is exactly `ber`. Mixture DAE flips both bits.
#[derive(Debug, Clone, PartialEq)]
pub struct BerMixture {
    ber: f64,
    probs: [f64; 4],
    injector: Injector,
}

impl BerMixture {
    pub fn new(ber: f64, region: Region) -> Result<Self, FaultError> {
        if !(0.0..=MAX_BER).contains(&ber) {
            return Err(FaultError::BerOutOfRange(ber));
        }
        let norm: f64 = MIXTURE.iter().map(|(_, a, b)| a * b).sum();
        let n = region.bits() as f64;
        let mut probs = [0.0; 4];
        for (p, (mode, a, _)) in probs.iter_mut().zip(MIXTURE) {
            *p = ber * n * a / norm;
            if *p > 1.0 {
                return Err(FaultError::Saturated { mode, p: *p });
            }
        }
        Ok(Self { ber, probs, injector: Injector::new(region, DaePolicy::BothBits) })
    }

    pub fn ber(&self) -> f64 {
        self.ber
    }

    pub fn probabilities(&self) -> [f64; 4] {
        self.probs
    }

    pub fn scope_bits(&self) -> u32 {
        self.injector.region.bits()
    }

    /// Events for one block. Every mode consumes the same draws whether or
    /// not it fires, so with a shared stream the fault set only grows with BER.
    pub fn sample_block<R: RngCore + ?Sized>(&self, rng: &mut R) -> Vec<FaultEvent> {
        let mut out = Vec::new();
        for (i, (mode, _, _)) in MIXTURE.iter().enumerate() {
            let u: f64 = rng.random();
            let ev = self.injector.inject(*mode, rng);
            if u < self.probs[i] {
                out.push(ev);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn within_window(e: &FaultEvent) -> bool {
        let w = e.mode.boundary_bits();
        (0..IMAGE_BITS as u32).all(|b| {
            let set = e.mask[b as usize / 64] >> (b % 64) & 1 == 1;
            !set || (b >= e.start_bit && b < e.start_bit + w)
        })
    }

    #[test]
    fn parse_names() {
        assert_eq!("32E".parse::<FaultMode>().unwrap(), FaultMode::E32);
        assert_eq!("se".parse::<FaultMode>().unwrap(), FaultMode::Se);
        let s: Scenario = "SE+16E".parse().unwrap();
        assert_eq!(s.modes, vec![FaultMode::Se, FaultMode::E16]);
        assert_eq!(s.to_string(), "SE+16E");
        assert!("SE+SE+SE".parse::<Scenario>().is_err());
        assert!("8E".parse::<Scenario>().is_err());
    }

    #[test]
    fn windows_and_alignment() {
        let mut rng = trial_rng(7, 0);
        for region in [Region::DataOnly, Region::FullImage] {
            for dae in [DaePolicy::HalfProbability, DaePolicy::BothBits] {
                let inj = Injector::new(region, dae);
                for mode in FaultMode::ALL {
                    for _ in 0..2000 {
                        let e = inj.inject(mode, &mut rng);
                        assert!(within_window(&e), "{mode} {e:?}");
                        match mode {
                            FaultMode::Se => assert_eq!(e.popcount(), 1),
                            FaultMode::Dae => {
                                assert_eq!(e.start_bit / 16, (e.start_bit + 1) / 16);
                                if dae == DaePolicy::BothBits {
                                    assert_eq!(e.popcount(), 2);
                                }
                            }
                            FaultMode::E16 | FaultMode::E32 => assert_eq!(e.start_bit % mode.boundary_bits(), 0),
                            FaultMode::Fc => assert_eq!(e.mask[4] >> 16, 0),
                        }
                        if mode != FaultMode::Fc && region == Region::DataOnly {
                            assert_eq!(e.mask[4], 0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn expected_popcounts() {
        let inj = Injector::default();
        let mut rng = trial_rng(1, 1);
        for (mode, want) in [(FaultMode::E16, 8.0), (FaultMode::E32, 16.0), (FaultMode::Fc, 136.0), (FaultMode::Dae, 1.0)] {
            let n = 100_000;
            let mean = (0..n).map(|_| inj.inject(mode, &mut rng).popcount() as f64).sum::<f64>() / n as f64;
            assert!((mean - want).abs() < 0.02 * want, "{mode}: {mean}");
        }
    }

    #[test]
    fn seeded_determinism() {
        let inj = Injector::default();
        let s: Scenario = "SE+32E".parse().unwrap();
        let a = inj.inject_scenario(&s, &mut trial_rng(42, 9));
        let b = inj.inject_scenario(&s, &mut trial_rng(42, 9));
        let c = inj.inject_scenario(&s, &mut trial_rng(42, 10));
        assert_eq!(a, b);
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn mixture_parameters() {
        assert!(BerMixture::new(-1e-9, Region::DataOnly).is_err());
        assert!(BerMixture::new(0.02, Region::DataOnly).is_err());
        let zero = BerMixture::new(0.0, Region::DataOnly).unwrap();
        let mut rng = trial_rng(3, 0);
        assert!((0..10_000).all(|_| zero.sample_block(&mut rng).is_empty()));
        let m = BerMixture::new(1e-3, Region::DataOnly).unwrap();
        let p = m.probabilities();
        let expected: f64 = p.iter().zip(MIXTURE).map(|(p, (_, _, b))| p * b).sum();
        assert!((expected / 256.0 - 1e-3).abs() < 1e-15);
        for (i, (_, a, _)) in MIXTURE.iter().enumerate() {
            assert!((p[i] / p[0] - a / 0.009).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_is_nested_in_ber() {
        let lo = BerMixture::new(1e-4, Region::DataOnly).unwrap();
        let hi = BerMixture::new(1e-3, Region::DataOnly).unwrap();
        for i in 0..20_000 {
            let a = lo.sample_block(&mut trial_rng(5, i));
            let b = hi.sample_block(&mut trial_rng(5, i));
            assert!(a.iter().all(|e| b.contains(e)));
        }
    }
}

//! Bit-exact models of the numeric formats stored in protected blocks, plus
//! the analysis of what single bit flips do to a stored value.
//!
//! Exponent bit `e[p]` is counted from the exponent LSB (`p = 0`), mantissa bit
//! `m[k]` from the mantissa MSB (`k = 0` has weight 1/2). Bit positions inside a
//! word are LSB = 0, so for BF16 `e[7]` is bit 14 and the sign is bit 15.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BitnumError {
    #[error("unknown numeric format `{0}`")]
    UnknownFormat(String),
    #[error("raw value {raw:#x} does not fit in {bits} bits")]
    RawTooWide { raw: u64, bits: u32 },
    #[error("bit index {index} out of range for a {bits}-bit field")]
    BitOutOfRange { index: u32, bits: u32 },
    #[error("{0} is not a floating-point format")]
    NotFloat(&'static str),
    #[error("value is {0:?}; only normal values are supported here")]
    NotNormal(ValueClass),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FormatKind {
    Float,
    /// Two's complement.
    Int,
}

/// How the all-ones exponent is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpecialEncoding {
    /// All-ones exponent is Inf (zero mantissa) or NaN.
    Ieee,
    /// No infinities; only all-ones exponent and mantissa is NaN (OCP FP8 E4M3).
    NanOnly,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NumFormat {
    pub name: &'static str,
    pub kind: FormatKind,
    pub total_bits: u32,
    pub sign_bits: u32,
    pub exp_bits: u32,
    pub mantissa_bits: u32,
    pub exp_bias: i32,
    pub specials: SpecialEncoding,
}

impl NumFormat {
    pub const BF16: NumFormat = NumFormat::float("bf16", 8, 7, SpecialEncoding::Ieee);
    pub const FP32: NumFormat = NumFormat::float("fp32", 8, 23, SpecialEncoding::Ieee);
    pub const FP16: NumFormat = NumFormat::float("fp16", 5, 10, SpecialEncoding::Ieee);
    pub const FP8_E4M3: NumFormat = NumFormat::float("fp8e4m3", 4, 3, SpecialEncoding::NanOnly);
    pub const FP8_E5M2: NumFormat = NumFormat::float("fp8e5m2", 5, 2, SpecialEncoding::Ieee);
    pub const INT8: NumFormat = NumFormat {
        name: "int8",
        kind: FormatKind::Int,
        total_bits: 8,
        sign_bits: 1,
        exp_bits: 0,
        mantissa_bits: 7,
        exp_bias: 0,
        specials: SpecialEncoding::None,
    };

    pub const ALL: [NumFormat; 6] =
        [Self::BF16, Self::FP32, Self::FP16, Self::FP8_E4M3, Self::FP8_E5M2, Self::INT8];

    const fn float(name: &'static str, exp_bits: u32, mantissa_bits: u32, specials: SpecialEncoding) -> Self {
        NumFormat {
            name,
            kind: FormatKind::Float,
            total_bits: 1 + exp_bits + mantissa_bits,
            sign_bits: 1,
            exp_bits,
            mantissa_bits,
            exp_bias: (1 << (exp_bits - 1)) - 1,
            specials,
        }
    }

    pub fn from_name(name: &str) -> Result<Self, BitnumError> {
        let key = name.to_ascii_lowercase().replace(['-', '_'], "");
        let found = match key.as_str() {
            "bf16" | "bfloat16" => Self::BF16,
            "fp32" | "f32" | "float32" => Self::FP32,
            "fp16" | "f16" | "float16" => Self::FP16,
            "fp8e4m3" | "e4m3" => Self::FP8_E4M3,
            "fp8e5m2" | "e5m2" => Self::FP8_E5M2,
            "int8" | "i8" => Self::INT8,
            _ => return Err(BitnumError::UnknownFormat(name.to_string())),
        };
        Ok(found)
    }

    pub fn is_float(&self) -> bool {
        self.kind == FormatKind::Float
    }

    pub fn word_mask(&self) -> u32 {
        if self.total_bits == 32 { u32::MAX } else { (1 << self.total_bits) - 1 }
    }

    pub fn sign_bit(&self) -> u32 {
        self.total_bits - 1
    }

    pub fn max_exponent_field(&self) -> u32 {
        (1 << self.exp_bits) - 1
    }

    /// Bit position of exponent bit `e[p]`.
    pub fn exponent_bit(&self, p: u32) -> u32 {
        self.mantissa_bits + p
    }

    /// Bit position of mantissa bit `m[k]` (k = 0 is the MSB of the mantissa).
    pub fn mantissa_bit(&self, k: u32) -> u32 {
        self.mantissa_bits - 1 - k
    }

    /// Largest finite magnitude.
    pub fn max_finite(&self) -> f64 {
        match self.kind {
            FormatKind::Int => 127.0,
            FormatKind::Float => {
                let raw = match self.specials {
                    SpecialEncoding::Ieee => ((self.max_exponent_field() - 1) << self.mantissa_bits) | ((1 << self.mantissa_bits) - 1),
                    _ => (self.max_exponent_field() << self.mantissa_bits) | ((1 << self.mantissa_bits) - 2),
                };
                decode_raw(self, raw).value
            }
        }
    }
}

impl fmt::Display for NumFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name)
    }
}

impl Serialize for NumFormat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name)
    }
}

impl<'de> Deserialize<'de> for NumFormat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        NumFormat::from_name(&name).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BitWord {
    raw: u32,
    format: NumFormat,
}

impl BitWord {
    pub fn new(raw: u64, format: NumFormat) -> Result<Self, BitnumError> {
        if raw > format.word_mask() as u64 {
            return Err(BitnumError::RawTooWide { raw, bits: format.total_bits });
        }
        Ok(Self { raw: raw as u32, format })
    }

    /// Masks `raw` down to the format width.
    pub fn truncating(raw: u32, format: NumFormat) -> Self {
        Self { raw: raw & format.word_mask(), format }
    }

    pub fn raw(&self) -> u32 {
        self.raw
    }

    pub fn format(&self) -> NumFormat {
        self.format
    }

    pub fn sign(&self) -> u32 {
        self.raw >> self.format.sign_bit() & 1
    }

    pub fn exponent_field(&self) -> u32 {
        self.raw >> self.format.mantissa_bits & self.format.max_exponent_field()
    }

    pub fn mantissa_field(&self) -> u32 {
        self.raw & ((1 << self.format.mantissa_bits) - 1)
    }

    pub fn value(&self) -> f64 {
        decode_value(*self).value
    }

    pub fn class(&self) -> ValueClass {
        decode_value(*self).class
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueClass {
    Zero,
    Subnormal,
    Normal,
    Infinite,
    NaN,
    Integer,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decoded {
    pub value: f64,
    pub class: ValueClass,
}

pub fn decode_value(w: BitWord) -> Decoded {
    decode_raw(&w.format, w.raw)
}

fn decode_raw(fmt: &NumFormat, raw: u32) -> Decoded {
    if fmt.kind == FormatKind::Int {
        let v = ((raw << (32 - fmt.total_bits)) as i32) >> (32 - fmt.total_bits);
        return Decoded { value: v as f64, class: ValueClass::Integer };
    }
    let mb = fmt.mantissa_bits;
    let sign = if raw >> fmt.sign_bit() & 1 == 1 { -1.0 } else { 1.0 };
    let e = raw >> mb & fmt.max_exponent_field();
    let m = raw & ((1 << mb) - 1);
    let emax = fmt.max_exponent_field();
    match fmt.specials {
        SpecialEncoding::Ieee if e == emax => {
            return if m == 0 {
                Decoded { value: sign * f64::INFINITY, class: ValueClass::Infinite }
            } else {
                Decoded { value: f64::NAN, class: ValueClass::NaN }
            };
        }
        SpecialEncoding::NanOnly if e == emax && m == (1 << mb) - 1 => {
            return Decoded { value: f64::NAN, class: ValueClass::NaN };
        }
        _ => {}
    }
    if e == 0 {
        if m == 0 {
            return Decoded { value: sign * 0.0, class: ValueClass::Zero };
        }
        let v = m as f64 * exp2i(1 - fmt.exp_bias - mb as i32);
        return Decoded { value: sign * v, class: ValueClass::Subnormal };
    }
    let v = (1.0 + m as f64 * exp2i(-(mb as i32))) * exp2i(e as i32 - fmt.exp_bias);
    Decoded { value: sign * v, class: ValueClass::Normal }
}

/// Exact `2^k` for the exponent range used here.
pub fn exp2i(k: i32) -> f64 {
    2f64.powi(k)
}

pub fn flip_bits(w: BitWord, mask: u64) -> Result<BitWord, BitnumError> {
    if mask > w.format.word_mask() as u64 {
        return Err(BitnumError::RawTooWide { raw: mask, bits: w.format.total_bits });
    }
    Ok(BitWord { raw: w.raw ^ mask as u32, format: w.format })
}

/// Rounds `v` to the nearest representable word, ties to even.
///
/// Overflow goes to infinity for IEEE-style formats and saturates to the
/// largest finite value for formats without infinities; integers saturate.
pub fn encode_value(v: f64, fmt: NumFormat) -> BitWord {
    if fmt.kind == FormatKind::Int {
        let r = if v.is_nan() { 0.0 } else { v.round_ties_even().clamp(-128.0, 127.0) };
        return BitWord::truncating(r as i32 as u32, fmt);
    }
    let mb = fmt.mantissa_bits;
    let sign_bit = (v.is_sign_negative() as u32) << fmt.sign_bit();
    let emax = fmt.max_exponent_field();
    let nan_raw = match fmt.specials {
        SpecialEncoding::NanOnly => (emax << mb) | ((1 << mb) - 1),
        _ => (emax << mb) | (1 << (mb - 1)),
    };
    if v.is_nan() {
        return BitWord::truncating(nan_raw, fmt);
    }
    let a = v.abs();
    let overflow = || match fmt.specials {
        SpecialEncoding::Ieee => sign_bit | (emax << mb),
        _ => sign_bit | (emax << mb) | ((1 << mb) - 2),
    };
    if a.is_infinite() {
        return BitWord::truncating(overflow(), fmt);
    }
    if a == 0.0 {
        return BitWord::truncating(sign_bit, fmt);
    }
    let e_unbiased = floor_log2(a);
    let biased = e_unbiased + fmt.exp_bias;
    let magnitude: u64 = if biased >= 1 {
        let frac = (a * exp2i(-e_unbiased) - 1.0) * exp2i(mb as i32);
        let q = frac.round_ties_even() as u64;
        ((biased as u64) << mb) + q
    } else {
        // Subnormal; a carry out of the mantissa lands in exponent field 1.
        (a * exp2i(fmt.exp_bias - 1 + mb as i32)).round_ties_even() as u64
    };
    let limit = match fmt.specials {
        SpecialEncoding::Ieee => (emax as u64) << mb,
        _ => ((emax as u64) << mb) | ((1 << mb) - 1),
    };
    if magnitude >= limit {
        return BitWord::truncating(overflow(), fmt);
    }
    BitWord::truncating(sign_bit | magnitude as u32, fmt)
}

/// `floor(log2(a))` for finite positive `a`, exact.
fn floor_log2(a: f64) -> i32 {
    let bits = a.to_bits();
    let e = (bits >> 52 & 0x7FF) as i32;
    if e == 0 {
        // f64 subnormal
        let m = bits & ((1 << 52) - 1);
        -1074 + 63 - m.leading_zeros() as i32
    } else {
        e - 1023
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    ZeroToOne,
    OneToZero,
}

impl Polarity {
    pub fn label(&self) -> &'static str {
        match self {
            Polarity::ZeroToOne => "0->1",
            Polarity::OneToZero => "1->0",
        }
    }
}

/// Multiplicative change from flipping exponent bit `p`: `2^(+2^p)` or `2^(-2^p)`.
pub fn scale_factor(p: u32, polarity: Polarity) -> f64 {
    let log2 = scale_factor_log2(p, polarity);
    exp2i(log2 as i32)
}

pub fn scale_factor_log2(p: u32, polarity: Polarity) -> i64 {
    let mag = 1i64 << p;
    match polarity {
        Polarity::ZeroToOne => mag,
        Polarity::OneToZero => -mag,
    }
}

/// `|x' - x|` after flipping mantissa bit `m[k]` of a normal value.
pub fn mantissa_flip_bound(w: BitWord, k: u32) -> Result<f64, BitnumError> {
    let fmt = w.format;
    if !fmt.is_float() {
        return Err(BitnumError::NotFloat(fmt.name));
    }
    if k >= fmt.mantissa_bits {
        return Err(BitnumError::BitOutOfRange { index: k, bits: fmt.mantissa_bits });
    }
    let d = decode_value(w);
    if d.class != ValueClass::Normal {
        return Err(BitnumError::NotNormal(d.class));
    }
    // 2^-(k+1) / (1.m) * |x| collapses to 2^(e - bias - k - 1), exact in f64.
    Ok(exp2i(w.exponent_field() as i32 - fmt.exp_bias - k as i32 - 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BitField {
    Sign,
    Exponent,
    Mantissa,
    /// Two's complement magnitude bit of an integer.
    Integer,
}

/// Effect of one flip, kept symbolic so tables compare exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorRatio {
    /// x' / x = -1
    Negate,
    /// x' / x = 2^log2
    Scale { log2: i64 },
    /// |x' / x - 1| <= 2^log2, tight at m = 0
    MantissaDeviation { log2: i64 },
    /// x' - x = +-2^log2
    Additive { log2: i64 },
}

impl ErrorRatio {
    pub fn log2(&self) -> Option<i64> {
        match *self {
            ErrorRatio::Negate => None,
            ErrorRatio::Scale { log2 } | ErrorRatio::MantissaDeviation { log2 } | ErrorRatio::Additive { log2 } => Some(log2),
        }
    }

    /// Worst-case numeric value of the ratio (or additive deviation for integers).
    pub fn value(&self) -> f64 {
        match *self {
            ErrorRatio::Negate => -1.0,
            _ => exp2i(self.log2().unwrap() as i32),
        }
    }
}

impl fmt::Display for ErrorRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ErrorRatio::Negate => write!(f, "x(-1)"),
            ErrorRatio::Scale { log2 } => write!(f, "x2^{log2}"),
            ErrorRatio::MantissaDeviation { log2 } => write!(f, "x(1+-2^{log2})"),
            ErrorRatio::Additive { log2 } => write!(f, "+-2^{log2}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FlipImpact {
    /// Bit position within the word.
    pub bit: u32,
    pub field: BitField,
    /// `p` for exponent bits, `k` for mantissa bits, bit position otherwise.
    pub index: u32,
    pub polarity: Option<Polarity>,
    pub ratio: ErrorRatio,
}

pub fn flip_impact_table(fmt: NumFormat) -> Vec<FlipImpact> {
    let mut rows = Vec::new();
    if fmt.kind == FormatKind::Int {
        for b in (0..fmt.total_bits).rev() {
            let log2 = b as i64;
            rows.push(FlipImpact { bit: b, field: BitField::Integer, index: b, polarity: None, ratio: ErrorRatio::Additive { log2 } });
        }
        return rows;
    }
    rows.push(FlipImpact { bit: fmt.sign_bit(), field: BitField::Sign, index: 0, polarity: None, ratio: ErrorRatio::Negate });
    for p in (0..fmt.exp_bits).rev() {
        for pol in [Polarity::ZeroToOne, Polarity::OneToZero] {
            rows.push(FlipImpact {
                bit: fmt.exponent_bit(p),
                field: BitField::Exponent,
                index: p,
                polarity: Some(pol),
                ratio: ErrorRatio::Scale { log2: scale_factor_log2(p, pol) },
            });
        }
    }
    for k in 0..fmt.mantissa_bits {
        rows.push(FlipImpact {
            bit: fmt.mantissa_bit(k),
            field: BitField::Mantissa,
            index: k,
            polarity: None,
            ratio: ErrorRatio::MantissaDeviation { log2: -(k as i64 + 1) },
        });
    }
    rows
}

pub fn flip_impact_csv(fmt: NumFormat) -> String {
    let mut out = String::from("# rangeguard flip-impact v1\nformat,bit,field,index,polarity,ratio,log2\n");
    for r in flip_impact_table(fmt) {
        let field = match r.field {
            BitField::Sign => "s",
            BitField::Exponent => "e",
            BitField::Mantissa => "m",
            BitField::Integer => "b",
        };
        let pol = r.polarity.map(|p| p.label()).unwrap_or("any");
        let log2 = r.ratio.log2().map(|l| l.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{},{},{},{}\n", fmt.name, r.bit, field, r.index, pol, r.ratio, log2));
    }
    out
}

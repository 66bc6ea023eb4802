//! Arithmetic in the binary extension fields GF(2^m) used by the Reed-Solomon codes.
//!
//! Elements are carried as `u16` so the same table-driven implementation serves
//! GF(16) for the 4-bit RID symbols, GF(256) for the 8-bit symbols and
//! GF(65536) for the 16-bit on-die code of the baseline stack.

use std::sync::{Arc, OnceLock};

use thiserror::Error;

/// Field element. Always `< 2^symbol_bits` of the owning field.
pub type GfElem = u16;

/// x^4 + x + 1
pub const POLY_GF16: u32 = 0x13;
/// x^8 + x^4 + x^3 + x^2 + 1
pub const POLY_GF256: u32 = 0x11D;
/// x^16 + x^12 + x^3 + x + 1
pub const POLY_GF65536: u32 = 0x1100B;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GfError {
    #[error("unsupported symbol width {0} (expected 4, 8 or 16)")]
    UnsupportedWidth(u32),
    #[error("polynomial {poly:#x} does not have degree {bits}")]
    WrongDegree { poly: u32, bits: u32 },
    #[error("polynomial {0:#x} is not primitive")]
    NotPrimitive(u32),
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("value {value:#x} is not an element of GF(2^{bits})")]
    OutOfField { value: u32, bits: u32 },
}

/// A finite field GF(2^m) with precomputed discrete log / antilog tables.
#[derive(Debug, Clone)]
pub struct GfField {
    bits: u32,
    poly: u32,
    /// `exp[i] = alpha^i`, doubled in length so products of logs need no reduction.
    exp: Vec<GfElem>,
    /// `log[a]` for nonzero `a`; `log[0]` is unused.
    log: Vec<u32>,
}

impl GfField {
    /// Builds the field, rejecting polynomials whose root does not generate
    /// every nonzero element.
    pub fn new(bits: u32, poly: u32) -> Result<Self, GfError> {
        if !matches!(bits, 4 | 8 | 16) {
            return Err(GfError::UnsupportedWidth(bits));
        }
        if poly >> bits != 1 {
            return Err(GfError::WrongDegree { poly, bits });
        }
        let size = 1usize << bits;
        let order = size - 1;
        let mut exp = vec![0 as GfElem; 2 * order];
        let mut log = vec![0u32; size];
        let mut seen = vec![false; size];
        let mut x: u32 = 1;
        for i in 0..order {
            if seen[x as usize] {
                return Err(GfError::NotPrimitive(poly));
            }
            seen[x as usize] = true;
            exp[i] = x as GfElem;
            log[x as usize] = i as u32;
            x <<= 1;
            if x & (1 << bits) != 0 {
                x ^= poly;
            }
        }
        if x != 1 {
            return Err(GfError::NotPrimitive(poly));
        }
        for i in order..2 * order {
            exp[i] = exp[i - order];
        }
        Ok(Self { bits, poly, exp, log })
    }

    /// Shared instance with the conventional primitive polynomial for `bits`.
    pub fn standard(bits: u32) -> Result<Arc<GfField>, GfError> {
        static GF16: OnceLock<Arc<GfField>> = OnceLock::new();
        static GF256: OnceLock<Arc<GfField>> = OnceLock::new();
        static GF65536: OnceLock<Arc<GfField>> = OnceLock::new();
        let (cell, poly) = match bits {
            4 => (&GF16, POLY_GF16),
            8 => (&GF256, POLY_GF256),
            16 => (&GF65536, POLY_GF65536),
            other => return Err(GfError::UnsupportedWidth(other)),
        };
        Ok(cell
            .get_or_init(|| Arc::new(GfField::new(bits, poly).expect("standard polynomial is primitive")))
            .clone())
    }

    pub fn symbol_bits(&self) -> u32 {
        self.bits
    }

    pub fn primitive_poly(&self) -> u32 {
        self.poly
    }

    /// Number of field elements, `2^m`.
    pub fn size(&self) -> usize {
        1 << self.bits
    }

    /// Multiplicative group order, `2^m - 1`; also the full RS code length.
    pub fn order(&self) -> usize {
        (1 << self.bits) - 1
    }

    pub fn contains(&self, value: u32) -> bool {
        value < (1 << self.bits)
    }

    pub fn check(&self, value: u32) -> Result<GfElem, GfError> {
        if self.contains(value) {
            Ok(value as GfElem)
        } else {
            Err(GfError::OutOfField { value, bits: self.bits })
        }
    }

    #[inline]
    pub fn add(&self, a: GfElem, b: GfElem) -> GfElem {
        a ^ b
    }

    #[inline]
    pub fn mul(&self, a: GfElem, b: GfElem) -> GfElem {
        if a == 0 || b == 0 {
            0
        } else {
            self.exp[(self.log[a as usize] + self.log[b as usize]) as usize]
        }
    }

    pub fn inv(&self, a: GfElem) -> Result<GfElem, GfError> {
        if a == 0 {
            return Err(GfError::ZeroInverse);
        }
        let order = self.order() as u32;
        Ok(self.exp[((order - self.log[a as usize]) % order) as usize])
    }

    /// `a / b`; `b` must be nonzero.
    #[inline]
    pub fn div(&self, a: GfElem, b: GfElem) -> GfElem {
        assert_ne!(b, 0, "division by zero in GF(2^{})", self.bits);
        if a == 0 {
            return 0;
        }
        let order = self.order() as u32;
        self.exp[(self.log[a as usize] + order - self.log[b as usize]) as usize]
    }

    /// `alpha^e` for any (possibly large) exponent.
    #[inline]
    pub fn alpha_pow(&self, e: usize) -> GfElem {
        self.exp[e % self.order()]
    }

    /// Discrete log base alpha of a nonzero element.
    #[inline]
    pub fn log(&self, a: GfElem) -> Option<usize> {
        (a != 0).then(|| self.log[a as usize] as usize)
    }
}

//! Shortened systematic Reed-Solomon codes over GF(2^m).
//!
//! Codewords are laid out data first, parity last. Symbol `i` of an `n`-symbol
//! word is the coefficient of `x^(n-1-i)`, so the virtual zero prefix of a
//! shortened code sits at degrees `n..2^m-1`. The generator has consecutive
//! roots `alpha^0 .. alpha^(n-k-1)`.
//!
//! Decoding is syndrome computation, Berlekamp-Massey, a Chien search over the
//! `n` live positions and Forney's formula. A locator whose roots are not all
//! found among the live positions (including roots that fall into the shortened
//! prefix) is reported as uncorrectable rather than applied.

use std::sync::Arc;

use thiserror::Error;

use crate::gf::{GfElem, GfError, GfField};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RsError {
    #[error("invalid code parameters n={n}, k={k} for GF(2^{bits})")]
    InvalidParameters { n: usize, k: usize, bits: u32 },
    #[error("expected {expected} symbols, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error(transparent)]
    Field(#[from] GfError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsStatus {
    Corrected,
    Uncorrectable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsDecodeResult {
    pub status: RsStatus,
    /// The corrected word when `status == Corrected`, otherwise the received word.
    pub corrected_word: Vec<GfElem>,
    pub error_positions: Vec<usize>,
    pub error_magnitudes: Vec<GfElem>,
}

impl RsDecodeResult {
    pub fn is_corrected(&self) -> bool {
        self.status == RsStatus::Corrected
    }
}

#[derive(Debug, Clone)]
pub struct RsCode {
    field: Arc<GfField>,
    n: usize,
    k: usize,
    /// Generator coefficients, highest degree first (`generator[0] == 1`).
    generator: Vec<GfElem>,
}

impl RsCode {
    pub fn new(field: Arc<GfField>, n: usize, k: usize) -> Result<Self, RsError> {
        if k == 0 || n <= k || n > field.order() {
            return Err(RsError::InvalidParameters { n, k, bits: field.symbol_bits() });
        }
        let mut generator: Vec<GfElem> = vec![1];
        for j in 0..n - k {
            // multiply by (x + alpha^j)
            let root = field.alpha_pow(j);
            let mut next = vec![0; generator.len() + 1];
            for (i, &g) in generator.iter().enumerate() {
                next[i] ^= g;
                next[i + 1] ^= field.mul(g, root);
            }
            generator = next;
        }
        Ok(Self { field, n, k, generator })
    }

    /// RS(n,k) over the standard field of the given symbol width.
    pub fn standard(symbol_bits: u32, n: usize, k: usize) -> Result<Self, RsError> {
        Self::new(GfField::standard(symbol_bits)?, n, k)
    }

    pub fn field(&self) -> &GfField {
        &self.field
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn parity_len(&self) -> usize {
        self.n - self.k
    }

    /// Correction capability `floor((n-k)/2)`.
    pub fn t(&self) -> usize {
        (self.n - self.k) / 2
    }

    pub fn full_length(&self) -> usize {
        self.field.order()
    }

    pub fn generator_poly(&self) -> &[GfElem] {
        &self.generator
    }

    fn check_symbols(&self, symbols: &[GfElem]) -> Result<(), RsError> {
        for &s in symbols {
            self.field.check(s as u32)?;
        }
        Ok(())
    }

    /// Parity symbols for `data` (length `k`).
    pub fn encode(&self, data: &[GfElem]) -> Result<Vec<GfElem>, RsError> {
        if data.len() != self.k {
            return Err(RsError::WrongLength { expected: self.k, got: data.len() });
        }
        self.check_symbols(data)?;
        let mut parity = vec![0; self.parity_len()];
        self.encode_into(data, &mut parity);
        Ok(parity)
    }

    /// Unchecked encoder used on hot paths; `parity.len()` must be `n - k`.
    pub(crate) fn encode_into(&self, data: &[GfElem], parity: &mut [GfElem]) {
        let np = parity.len();
        parity.fill(0);
        for &d in data {
            let feedback = d ^ parity[0];
            parity.copy_within(1.., 0);
            parity[np - 1] = 0;
            if feedback != 0 {
                for (p, &g) in parity.iter_mut().zip(&self.generator[1..]) {
                    *p ^= self.field.mul(feedback, g);
                }
            }
        }
    }

    /// Full codeword `data || parity`.
    pub fn encode_codeword(&self, data: &[GfElem]) -> Result<Vec<GfElem>, RsError> {
        let mut word = data.to_vec();
        word.extend(self.encode(data)?);
        Ok(word)
    }

    /// `S_j = r(alpha^j)` for `j = 0..n-k`.
    pub fn syndromes(&self, word: &[GfElem]) -> Vec<GfElem> {
        (0..self.parity_len())
            .map(|j| {
                let x = self.field.alpha_pow(j);
                word.iter().fold(0, |acc, &c| self.field.mul(acc, x) ^ c)
            })
            .collect()
    }

    pub fn decode(&self, received: &[GfElem]) -> Result<RsDecodeResult, RsError> {
        if received.len() != self.n {
            return Err(RsError::WrongLength { expected: self.n, got: received.len() });
        }
        self.check_symbols(received)?;
        Ok(self.decode_unchecked(received))
    }

    pub(crate) fn decode_unchecked(&self, received: &[GfElem]) -> RsDecodeResult {
        let f = &*self.field;
        let uncorrectable = || RsDecodeResult {
            status: RsStatus::Uncorrectable,
            corrected_word: received.to_vec(),
            error_positions: Vec::new(),
            error_magnitudes: Vec::new(),
        };

        let syn = self.syndromes(received);
        if syn.iter().all(|&s| s == 0) {
            return RsDecodeResult {
                status: RsStatus::Corrected,
                corrected_word: received.to_vec(),
                error_positions: Vec::new(),
                error_magnitudes: Vec::new(),
            };
        }

        let lambda = berlekamp_massey(f, &syn);
        let degree = lambda.len() - 1;
        if degree == 0 || degree > self.t() {
            return uncorrectable();
        }

        // Chien search restricted to live positions; roots elsewhere go uncounted.
        let mut positions = Vec::with_capacity(degree);
        let mut locators = Vec::with_capacity(degree);
        for p in 0..self.n {
            let x_inv = f.alpha_pow(f.order() - p % f.order());
            if eval_ascending(f, &lambda, x_inv) == 0 {
                positions.push(self.n - 1 - p);
                locators.push(f.alpha_pow(p));
            }
        }
        if positions.len() != degree {
            return uncorrectable();
        }

        // Omega = S(x) * Lambda(x) mod x^(n-k)
        let np = self.parity_len();
        let mut omega = vec![0; np];
        for (i, &s) in syn.iter().enumerate() {
            for (j, &l) in lambda.iter().enumerate() {
                if i + j < np {
                    omega[i + j] ^= f.mul(s, l);
                }
            }
        }
        // Formal derivative: odd-degree coefficients shift down.
        let lambda_prime: Vec<GfElem> =
            (1..lambda.len()).map(|i| if i % 2 == 1 { lambda[i] } else { 0 }).collect();

        let mut word = received.to_vec();
        let mut magnitudes = Vec::with_capacity(degree);
        for (&pos, &x) in positions.iter().zip(&locators) {
            let x_inv = f.inv(x).expect("locator is nonzero");
            let denom = eval_ascending(f, &lambda_prime, x_inv);
            if denom == 0 {
                return uncorrectable();
            }
            // first consecutive root exponent b = 0 gives the factor X^(1-b) = X
            let mag = f.mul(x, f.div(eval_ascending(f, &omega, x_inv), denom));
            if mag == 0 {
                return uncorrectable();
            }
            word[pos] ^= mag;
            magnitudes.push(mag);
        }
        if self.syndromes(&word).iter().any(|&s| s != 0) {
            return uncorrectable();
        }
        RsDecodeResult {
            status: RsStatus::Corrected,
            corrected_word: word,
            error_positions: positions,
            error_magnitudes: magnitudes,
        }
    }
}

fn eval_ascending(f: &GfField, poly: &[GfElem], x: GfElem) -> GfElem {
    poly.iter().rev().fold(0, |acc, &c| f.mul(acc, x) ^ c)
}

/// Returns the error locator, lowest degree first, trimmed to its true degree.
fn berlekamp_massey(f: &GfField, syn: &[GfElem]) -> Vec<GfElem> {
    let mut lambda: Vec<GfElem> = vec![1];
    let mut prev: Vec<GfElem> = vec![1];
    let mut len = 0usize;
    let mut shift = 1usize;
    let mut prev_disc: GfElem = 1;

    for r in 0..syn.len() {
        let mut d = syn[r];
        for i in 1..=len.min(lambda.len() - 1) {
            d ^= f.mul(lambda[i], syn[r - i]);
        }
        if d == 0 {
            shift += 1;
            continue;
        }
        let coef = f.div(d, prev_disc);
        let mut next = lambda.clone();
        if next.len() < prev.len() + shift {
            next.resize(prev.len() + shift, 0);
        }
        for (i, &b) in prev.iter().enumerate() {
            next[i + shift] ^= f.mul(coef, b);
        }
        if 2 * len <= r {
            prev = std::mem::replace(&mut lambda, next);
            len = r + 1 - len;
            prev_disc = d;
            shift = 1;
        } else {
            lambda = next;
            shift += 1;
        }
    }
    while lambda.len() > 1 && *lambda.last().unwrap() == 0 {
        lambda.pop();
    }
    lambda
}

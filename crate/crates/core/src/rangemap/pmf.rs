use statrs::function::erf::{erf, erfc, erfc_inv};

use super::RangeMapError;
use crate::bitnum::{exp2i, NumFormat};

/// Standard normal CDF.
pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse of [`standard_normal_cdf`].
pub fn standard_normal_quantile(p: f64) -> f64 {
    let mut x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    if !x.is_finite() {
        return x;
    }
    // erfc_inv is good to ~1e-10 relative; two Newton steps reach full precision.
    for _ in 0..2 {
        let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if pdf == 0.0 {
            break;
        }
        x -= (standard_normal_cdf(x) - p) / pdf;
    }
    x
}

/// `2 [Phi(b) - Phi(a)]` for `0 <= a <= b`, i.e. `P(a <= |X| < b)` for `X ~ N(0, 1)`.
fn two_sided_mass(a: f64, b: f64) -> f64 {
    let s = std::f64::consts::SQRT_2;
    if a >= 1.0 {
        erfc(a / s) - erfc(b / s)
    } else {
        erf(b / s) - erf(a / s)
    }
}

/// Distribution of the exponent field of a value drawn from `N(0, sigma^2)`.
///
/// Mass below the smallest normal exponent (subnormals and exact zero) is
/// folded into bin 0 and the tail beyond the largest finite exponent into the
/// top bin.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentPmf {
    format: NumFormat,
    sigma: f64,
    probs: Vec<f64>,
}

impl ExponentPmf {
    pub fn gaussian(sigma: f64, format: NumFormat) -> Result<Self, RangeMapError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(RangeMapError::InvalidSigma(sigma));
        }
        if !format.is_float() {
            return Err(RangeMapError::NotApplicable("exponent"));
        }
        let bias = format.exp_bias;
        let top = format.max_exponent_field();
        let edge = |k: u32| exp2i(k as i32 - bias) / sigma;
        let probs = (0..=top)
            .map(|k| {
                let lo = if k == 0 { 0.0 } else { edge(k) };
                let hi = if k == top { f64::INFINITY } else { edge(k + 1) };
                two_sided_mass(lo, hi).max(0.0)
            })
            .collect();
        Ok(Self { format, sigma, probs })
    }

    /// Arbitrary nonnegative weights over the exponent alphabet, normalized.
    pub fn from_weights(weights: Vec<f64>, format: NumFormat) -> Result<Self, RangeMapError> {
        if weights.len() != format.max_exponent_field() as usize + 1 {
            return Err(RangeMapError::Invalid(format!("{} weights for a {}-bit exponent", weights.len(), format.exp_bits)));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) || !(total > 0.0) {
            return Err(RangeMapError::Invalid("weights must be finite, nonnegative and not all zero".into()));
        }
        Ok(Self { format, sigma: f64::NAN, probs: weights.iter().map(|w| w / total).collect() })
    }

    pub fn format(&self) -> NumFormat {
        self.format
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn prob(&self, e: u32) -> f64 {
        self.probs[e as usize]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn argmax(&self) -> u32 {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best as u32
    }
}

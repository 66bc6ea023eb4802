use super::pmf::{standard_normal_cdf, standard_normal_quantile};
use super::{rid_bits_for, Interval, MapKind, RangeEntry, RangeMap, RangeMapError};
use crate::bitnum::{encode_value, NumFormat};

const MAX_ITERATIONS: usize = 100_000;
const TOLERANCE: f64 = 1e-13;

/// L1-optimal quantizer for the standard normal, before scaling and rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct IdealSolution {
    /// Interior thresholds `c_1 < ... < c_{K-1}`.
    pub thresholds: Vec<f64>,
    /// Conditional medians `r_1 < ... < r_K`.
    pub representatives: Vec<f64>,
    pub iterations: usize,
}

/// Median of `N(0, 1)` restricted to `(a, b)`.
///
/// Intervals in the upper half are handled through the survival function so
/// the far tail keeps its precision.
pub(crate) fn conditional_median(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        let (qa, qb) = (standard_normal_cdf(-a), standard_normal_cdf(-b));
        -standard_normal_quantile(0.5 * (qa + qb))
    } else {
        standard_normal_quantile(0.5 * (standard_normal_cdf(a) + standard_normal_cdf(b)))
    }
}

/// Alternates conditional-median representatives and midpoint thresholds
/// until the thresholds stop moving.
pub fn ideal_gaussian_solution(num_ranges: usize) -> Result<IdealSolution, RangeMapError> {
    if !(2..=256).contains(&num_ranges) {
        return Err(RangeMapError::RangeCount { got: num_ranges, min: 2, max: 256 });
    }
    let k = num_ranges;
    // equiprobable start
    let mut c: Vec<f64> = (1..k).map(|i| standard_normal_quantile(i as f64 / k as f64)).collect();
    let mut r = vec![0.0; k];
    for it in 1..=MAX_ITERATIONS {
        for i in 0..k {
            let a = if i == 0 { f64::NEG_INFINITY } else { c[i - 1] };
            let b = if i == k - 1 { f64::INFINITY } else { c[i] };
            r[i] = conditional_median(a, b);
        }
        let mut delta: f64 = 0.0;
        for i in 0..k - 1 {
            let next = 0.5 * (r[i] + r[i + 1]);
            delta = delta.max((next - c[i]).abs());
            c[i] = next;
        }
        if delta < TOLERANCE {
            // Exact symmetry for the values that must be symmetric.
            for i in 0..(k - 1) / 2 {
                let s = 0.5 * (c[k - 2 - i] - c[i]);
                c[i] = -s;
                c[k - 2 - i] = s;
            }
            if k % 2 == 0 {
                c[k / 2 - 1] = 0.0;
            }
            for i in 0..k / 2 {
                let s = 0.5 * (r[k - 1 - i] - r[i]);
                r[i] = -s;
                r[k - 1 - i] = s;
            }
            return Ok(IdealSolution { thresholds: c, representatives: r, iterations: it });
        }
    }
    Err(RangeMapError::NonConvergence(MAX_ITERATIONS))
}

/// Value-domain map for `N(0, sigma^2)`: thresholds `sigma * c_i`, and
/// representatives `sigma * r_i` rounded into `format`.
pub fn build_ideal_map(
    sigma: f64,
    num_ranges: usize,
    format: NumFormat,
) -> Result<(RangeMap, IdealSolution), RangeMapError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(RangeMapError::InvalidSigma(sigma));
    }
    let sol = ideal_gaussian_solution(num_ranges)?;
    let map = value_map(format, MapKind::Ideal, sigma, &sol.thresholds, &sol.representatives, sigma)?;
    Ok((map, sol))
}

/// Shared by the value-domain builders: `scale` multiplies thresholds and
/// representatives.
pub(crate) fn value_map(
    format: NumFormat,
    kind: MapKind,
    sigma: f64,
    thresholds: &[f64],
    reps: &[f64],
    scale: f64,
) -> Result<RangeMap, RangeMapError> {
    let k = reps.len();
    let entries = (0..k)
        .map(|i| RangeEntry {
            interval: Interval::Value {
                lo: if i == 0 { f64::NEG_INFINITY } else { scale * thresholds[i - 1] },
                hi: if i == k - 1 { f64::INFINITY } else { scale * thresholds[i] },
            },
            rep_bits: encode_value(scale * reps[i], format).raw(),
            rid: i as u32,
        })
        .collect();
    RangeMap::new(format, kind, sigma, rid_bits_for(k), entries)
}

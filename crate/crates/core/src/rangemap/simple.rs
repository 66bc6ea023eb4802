use super::{rid_bits_for, ExponentPmf, Interval, MapKind, RangeEntry, RangeMap, RangeMapError};
use crate::bitnum::{exp2i, NumFormat};

/// Optimal contiguous partition of a weighted, sorted alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Inclusive index ranges, in order.
    pub ranges: Vec<(usize, usize)>,
    /// Index of the weighted median chosen as each range's representative.
    pub medians: Vec<usize>,
    pub cost: f64,
}

/// Lowest index whose cumulative weight reaches half the segment's weight.
fn weighted_median(weights: &[f64], i: usize, j: usize) -> usize {
    let total: f64 = weights[i..=j].iter().sum();
    let mut acc = 0.0;
    for (m, w) in weights.iter().enumerate().take(j + 1).skip(i) {
        acc += w;
        if 2.0 * acc >= total {
            return m;
        }
    }
    j
}

fn segment_cost(values: &[f64], weights: &[f64], i: usize, j: usize, m: usize) -> f64 {
    let mut cost = 0.0;
    for e in i..=j {
        cost += weights[e] * (values[e] - values[m]).abs();
    }
    cost
}

/// Minimizes `sum_k sum_{e in range k} w_e |v_e - v_median(k)|` over all
/// partitions of `0..n` into exactly `k` contiguous nonempty ranges.
///
/// Ties keep the lowest boundary.
pub fn optimal_partition(values: &[f64], weights: &[f64], k: usize) -> Result<Partition, RangeMapError> {
    let n = values.len();
    if weights.len() != n {
        return Err(RangeMapError::Invalid("values and weights differ in length".into()));
    }
    if k < 1 || k > n {
        return Err(RangeMapError::RangeCount { got: k, min: 1, max: n });
    }
    // cost[i][j], median[i][j] for i <= j
    let mut cost = vec![vec![0.0; n]; n];
    let mut median = vec![vec![0usize; n]; n];
    for i in 0..n {
        for j in i..n {
            let m = weighted_median(weights, i, j);
            median[i][j] = m;
            cost[i][j] = segment_cost(values, weights, i, j, m);
        }
    }
    // d[c][j]: best cost of splitting 0..=j into c+1 ranges; start[c][j] is the
    // first index of the last range.
    let mut d = vec![vec![f64::INFINITY; n]; k];
    let mut start = vec![vec![0usize; n]; k];
    for j in 0..n {
        d[0][j] = cost[0][j];
    }
    for c in 1..k {
        for j in c..n {
            let mut best = f64::INFINITY;
            let mut arg = c;
            for i in c..=j {
                let v = d[c - 1][i - 1] + cost[i][j];
                if v < best {
                    best = v;
                    arg = i;
                }
            }
            d[c][j] = best;
            start[c][j] = arg;
        }
    }
    let mut ranges = Vec::with_capacity(k);
    let mut j = n - 1;
    for c in (0..k).rev() {
        let i = if c == 0 { 0 } else { start[c][j] };
        ranges.push((i, j));
        if c > 0 {
            j = i - 1;
        }
    }
    ranges.reverse();
    let medians = ranges.iter().map(|&(i, j)| median[i][j]).collect();
    Ok(Partition { ranges, medians, cost: d[k - 1][n - 1] })
}

/// Exponent-domain map with `k` ranges minimizing the magnitude-level MAE
/// under `pmf`, with `f(e) = 2^(e - bias)`.
pub fn build_simple_map(pmf: &ExponentPmf, k: usize) -> Result<RangeMap, RangeMapError> {
    let format: NumFormat = pmf.format();
    let n = format.max_exponent_field() as usize + 1;
    if !(2..=n).contains(&k) {
        return Err(RangeMapError::RangeCount { got: k, min: 2, max: n });
    }
    let values: Vec<f64> = (0..n).map(|e| exp2i(e as i32 - format.exp_bias)).collect();
    let part = optimal_partition(&values, pmf.probs(), k)?;
    let entries = part
        .ranges
        .iter()
        .zip(&part.medians)
        .enumerate()
        .map(|(rid, (&(lo, hi), &m))| RangeEntry {
            interval: Interval::Exponent { lo: lo as u32, hi: hi as u32 },
            rep_bits: (m as u32) << format.mantissa_bits,
            rid: rid as u32,
        })
        .collect();
    RangeMap::new(format, MapKind::SimpleExponent, pmf.sigma(), rid_bits_for(k), entries)
}

use super::ideal::value_map;
use super::{rid_bits_for, Interval, MapKind, RangeEntry, RangeMap, RangeMapError};
use crate::bitnum::{encode_value, NumFormat};

const MAX_ITERATIONS: usize = 100;
const COST_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LloydMaxReport {
    /// Unrounded thresholds and representatives.
    pub thresholds: Vec<f64>,
    pub representatives: Vec<f64>,
    /// Mean absolute error after each iteration.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    /// Set when every sample is equal and the map collapses to one range.
    pub degenerate: bool,
}

fn mean_abs_cost(sorted: &[f64], bounds: &[usize], reps: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, rep) in reps.iter().enumerate() {
        for x in &sorted[bounds[i]..bounds[i + 1]] {
            total += (x - rep).abs();
        }
    }
    total / sorted.len() as f64
}

/// Splits sorted samples at thresholds: range `i` is `sorted[bounds[i]..bounds[i+1]]`.
fn split(sorted: &[f64], thresholds: &[f64]) -> Vec<usize> {
    let mut b = Vec::with_capacity(thresholds.len() + 2);
    b.push(0);
    b.extend(thresholds.iter().map(|&c| sorted.partition_point(|&x| x < c)));
    b.push(sorted.len());
    b
}

/// Lloyd-Max quantizer with medians in place of centroids, so each step
/// lowers the mean absolute error on `samples`.
pub fn build_lloydmax_map(
    samples: &[f64],
    num_ranges: usize,
    format: NumFormat,
) -> Result<(RangeMap, LloydMaxReport), RangeMapError> {
    if !(2..=256).contains(&num_ranges) {
        return Err(RangeMapError::RangeCount { got: num_ranges, min: 2, max: 256 });
    }
    let mut sorted: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
    if sorted.is_empty() {
        return Err(RangeMapError::InsufficientSamples { needed: num_ranges, got: 0 });
    }
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    // RMS of the samples, recorded as the map's scale
    let sigma = (sorted.iter().map(|x| x * x).sum::<f64>() / sorted.len() as f64).sqrt();

    if distinct.len() == 1 {
        let v = distinct[0];
        let entry = RangeEntry {
            interval: Interval::Value { lo: f64::NEG_INFINITY, hi: f64::INFINITY },
            rep_bits: encode_value(v, format).raw(),
            rid: 0,
        };
        let map = RangeMap::new(format, MapKind::LloydMax, sigma, rid_bits_for(num_ranges), vec![entry])?;
        let report = LloydMaxReport {
            thresholds: Vec::new(),
            representatives: vec![v],
            cost_history: vec![0.0],
            iterations: 0,
            degenerate: true,
        };
        return Ok((map, report));
    }
    if distinct.len() < num_ranges {
        return Err(RangeMapError::InsufficientSamples { needed: num_ranges, got: distinct.len() });
    }

    let k = num_ranges;
    // Start from evenly spaced distinct values.
    let mut reps: Vec<f64> = (0..k).map(|i| distinct[(2 * i + 1) * distinct.len() / (2 * k)]).collect();
    let mut thresholds: Vec<f64> = reps.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let mut history = Vec::new();
    let mut iterations = 0;
    for _ in 0..MAX_ITERATIONS {
        iterations += 1;
        let bounds = split(&sorted, &thresholds);
        for i in 0..k {
            let slice = &sorted[bounds[i]..bounds[i + 1]];
            if !slice.is_empty() {
                reps[i] = slice[(slice.len() - 1) / 2];
            }
        }
        for i in 0..k - 1 {
            thresholds[i] = 0.5 * (reps[i] + reps[i + 1]);
        }
        let cost = mean_abs_cost(&sorted, &split(&sorted, &thresholds), &reps);
        let done = history.last().is_some_and(|&prev: &f64| (prev - cost).abs() < COST_TOLERANCE);
        history.push(cost);
        if done {
            break;
        }
    }
    let map = value_map(format, MapKind::LloydMax, sigma, &thresholds, &reps, 1.0)?;
    let report = LloydMaxReport { thresholds, representatives: reps, cost_history: history, iterations, degenerate: false };
    Ok((map, report))
}

//! CSV and JSON renderings. Every CSV starts with a versioned comment line.

use std::fmt::Write;

use serde_json::{json, Value};

use super::coverage::CoverageTally;
use super::proxy::ProxyReport;
use crate::schemes::{Outcome, SchemeKind};

pub const COVERAGE_HEADER: &str = "# rangeguard coverage v1";
pub const SWEEP_HEADER: &str = "# rangeguard ber-sweep v1";

fn scheme_rank(k: SchemeKind) -> usize {
    SchemeKind::ALL.iter().position(|&x| x == k).expect("listed kind")
}

/// Scenario groups in first-appearance order, schemes in a fixed order.
pub fn ordered(tallies: &[CoverageTally]) -> Vec<&CoverageTally> {
    let mut scenarios: Vec<&str> = Vec::new();
    for t in tallies {
        if !scenarios.contains(&t.scenario.as_str()) {
            scenarios.push(&t.scenario);
        }
    }
    let mut rows: Vec<&CoverageTally> = tallies.iter().collect();
    rows.sort_by_key(|t| (scenarios.iter().position(|s| *s == t.scenario), scheme_rank(t.scheme)));
    rows
}

fn structural_label(t: &CoverageTally) -> &'static str {
    match t.structural_ok() {
        Some(true) => "pass",
        Some(false) => "FAIL",
        None => "-",
    }
}

pub fn coverage_csv(tallies: &[CoverageTally]) -> String {
    let mut s = String::new();
    writeln!(s, "{COVERAGE_HEADER}").unwrap();
    let mut cols: Vec<String> = ["scenario", "scheme", "region", "trials"].iter().map(|c| c.to_string()).collect();
    cols.extend(Outcome::ALL.iter().map(|o| o.label().to_lowercase()));
    cols.extend(Outcome::ALL.iter().map(|o| format!("{}_pct", o.label().to_lowercase())));
    for o in Outcome::ALL {
        let l = o.label().to_lowercase();
        cols.push(format!("{l}_ci_lo"));
        cols.push(format!("{l}_ci_hi"));
    }
    cols.extend(["bound_violations", "within_t", "within_t_failures", "structural"].iter().map(|c| c.to_string()));
    writeln!(s, "{}", cols.join(",")).unwrap();
    for t in ordered(tallies) {
        let region = serde_json::to_value(t.region).unwrap();
        let mut f = vec![t.scenario.clone(), t.scheme.name().to_string(), region.as_str().unwrap().to_string(), t.trials.to_string()];
        f.extend(Outcome::ALL.iter().map(|&o| t.count(o).to_string()));
        f.extend(Outcome::ALL.iter().map(|&o| format!("{:.6}", t.percent(o))));
        for o in Outcome::ALL {
            let (lo, hi) = t.ci(o);
            f.push(format!("{:.6}", 100.0 * lo));
            f.push(format!("{:.6}", 100.0 * hi));
        }
        f.push(t.bound_violations.to_string());
        f.push(t.within_t.to_string());
        f.push(t.within_t_failures.to_string());
        f.push(structural_label(t).to_string());
        writeln!(s, "{}", f.join(",")).unwrap();
    }
    s
}

/// Nested `scenario -> scheme -> cell` layout.
pub fn coverage_json(tallies: &[CoverageTally]) -> Value {
    let mut rows: Vec<Value> = Vec::new();
    let mut current: Option<&str> = None;
    for t in ordered(tallies) {
        let mut pct = serde_json::Map::new();
        let mut ci = serde_json::Map::new();
        for o in Outcome::ALL {
            pct.insert(o.label().into(), json!(t.percent(o)));
            let (lo, hi) = t.ci(o);
            ci.insert(o.label().into(), json!([100.0 * lo, 100.0 * hi]));
        }
        let cell = json!({
            "scheme": t.scheme.name(),
            "region": t.region,
            "trials": t.trials,
            "counts": t.counts,
            "percent": pct,
            "ci95_percent": ci,
            "bound_violations": t.bound_violations,
            "within_t": t.within_t,
            "within_t_failures": t.within_t_failures,
            "structural": structural_label(t),
        });
        if current != Some(t.scenario.as_str()) {
            rows.push(json!({"scenario": t.scenario, "cells": []}));
            current = Some(&t.scenario);
        }
        rows.last_mut().unwrap()["cells"].as_array_mut().unwrap().push(cell);
    }
    json!({"report": "coverage", "version": 1, "rows": rows})
}

pub fn sweep_csv(reports: &[ProxyReport]) -> String {
    let mut s = String::new();
    writeln!(s, "{SWEEP_HEADER}").unwrap();
    writeln!(
        s,
        "scheme,ber,values,blocks,faulted_blocks,se_events,dae_events,e16_events,e32_events,flipped_bits,measured_ber,\
         noerror,ce,be,due,sdc,mae,max_abs_dev,nonfinite_values,frac_out_of_range,max_range_width"
    )
    .unwrap();
    for r in reports {
        let m = r.mode_events;
        let c = r.counts;
        writeln!(
            s,
            "{},{:e},{},{},{},{},{},{},{},{},{:e},{},{},{},{},{},{:e},{:e},{},{:e},{:e}",
            r.scheme.name(),
            r.ber,
            r.values,
            r.blocks,
            r.faulted_blocks,
            m[0],
            m[1],
            m[2],
            m[3],
            r.flipped_bits,
            r.measured_ber,
            c[0],
            c[1],
            c[2],
            c[3],
            c[4],
            r.mae,
            r.max_abs_dev,
            r.nonfinite_values,
            r.frac_out_of_range,
            r.max_range_width
        )
        .unwrap();
    }
    s
}

pub fn sweep_json(reports: &[ProxyReport]) -> Value {
    let rows: Vec<Value> = reports
        .iter()
        .map(|r| {
            let mut v = serde_json::to_value(r).expect("plain fields");
            // JSON has no infinities or NaN; spell them out.
            for key in ["mae", "max_abs_dev", "frac_out_of_range", "max_range_width"] {
                let x = match key {
                    "mae" => r.mae,
                    "max_abs_dev" => r.max_abs_dev,
                    "frac_out_of_range" => r.frac_out_of_range,
                    _ => r.max_range_width,
                };
                if !x.is_finite() {
                    v[key] = json!(x.to_string());
                }
            }
            v
        })
        .collect();
    json!({"report": "ber-sweep", "version": 1, "rows": rows})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::faults::{Region, Scenario};

    fn tally(scheme: SchemeKind, scenario: &str, counts: [u64; 5]) -> CoverageTally {
        let sc: Scenario = scenario.parse().unwrap();
        let mut t = CoverageTally::empty(scheme, &sc, Region::DataOnly);
        t.counts = counts;
        t.trials = counts.iter().sum();
        t
    }

    #[test]
    fn empty_is_header_only() {
        let csv = coverage_csv(&[]);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with(COVERAGE_HEADER));
        assert_eq!(sweep_csv(&[]).lines().count(), 2);
    }

    #[test]
    fn stable_order_and_percent_sum() {
        let ts = vec![
            tally(SchemeKind::RgDsc4, "SE", [0, 10, 90, 0, 0]),
            tally(SchemeKind::Baseline, "SE+SE", [0, 5, 0, 95, 0]),
            tally(SchemeKind::Baseline, "SE", [0, 100, 0, 0, 0]),
        ];
        let csv = coverage_csv(&ts);
        let rows: Vec<&str> = csv.lines().skip(2).collect();
        assert!(rows[0].starts_with("SE,rg-dsc4"));
        assert!(rows[1].starts_with("SE,baseline"));
        assert!(rows[2].starts_with("SE+SE,baseline"));
        for t in &ts {
            let total: f64 = Outcome::ALL.iter().map(|&o| t.percent(o)).sum();
            assert!((total - 100.0).abs() < 1e-9);
        }
        assert!(rows[0].ends_with(",pass"));
        let j = coverage_json(&ts);
        assert_eq!(j["rows"].as_array().unwrap().len(), 2);
        assert_eq!(j["rows"][0]["cells"][1]["scheme"], "baseline");
    }
}

//! wasm-bindgen bindings behind `www/index.html`. Every export returns a JSON
//! string; errors surface as thrown JS exceptions.

use bsc_exponent::exponents::{capacity, classical_exponent, printed_exponent, restricted_variational_exponent};
use bsc_exponent::oracle::{exponent_fit, Trend};
use bsc_exponent::statsum::theorem2_check;
use bsc_exponent::{ChannelBsc, TiePolicy};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_CURVE_POINTS: usize = 2000;
const MAX_ORACLE_N: usize = 20_000;
const MAX_SAMPLES: u64 = 200_000;

#[derive(Serialize)]
struct CurvePoint {
    rate: f64,
    printed: f64,
    selected: &'static str,
    classical: Option<f64>,
    restricted: Option<f64>,
    sphere_packing: f64,
}

#[derive(Serialize)]
struct Curves {
    p: f64,
    capacity: f64,
    r_cr: f64,
    r_crit: Option<f64>,
    points: Vec<CurvePoint>,
}

pub fn exponent_curves_json(p: f64, points: usize) -> Result<String, String> {
    let ch = ChannelBsc::new(p).map_err(|e| e.to_string())?;
    if !(2..=MAX_CURVE_POINTS).contains(&points) {
        return Err(format!("points must lie in 2..={MAX_CURVE_POINTS}"));
    }
    let cap = capacity(&ch);
    let noisy = p > 0.0;
    let mut out = Vec::with_capacity(points);
    let mut head = None;
    for i in 0..points {
        let rate = if i + 1 == points { cap } else { cap * i as f64 / (points - 1) as f64 };
        let br = printed_exponent(&ch, rate).map_err(|e| e.to_string())?;
        head.get_or_insert((br.r_cr, br.r_crit));
        let printed = match br.selected.label() {
            "branch1" => br.branch1.unwrap_or(f64::NAN),
            "branch2" => br.branch2,
            _ => br.branch3,
        };
        let (classical, restricted) = if noisy {
            (
                Some(classical_exponent(&ch, rate).map_err(|e| e.to_string())?),
                Some(restricted_variational_exponent(&ch, rate).map_err(|e| e.to_string())?.exponent),
            )
        } else {
            (None, None)
        };
        out.push(CurvePoint {
            rate,
            printed,
            selected: br.selected.label(),
            classical,
            restricted,
            sphere_packing: br.branch3,
        });
    }
    let (r_cr, r_crit) = head.unwrap_or((f64::NAN, None));
    to_json(&Curves {
        p,
        capacity: cap,
        r_cr,
        r_crit,
        points: out,
    })
}

#[derive(Serialize)]
struct OracleCurve {
    p: f64,
    rate: f64,
    tie_policy: &'static str,
    n: Vec<usize>,
    ln_pe: Vec<f64>,
    slope: f64,
    log_correction: f64,
    intercept: f64,
    per_step_slopes: Vec<f64>,
    trend: Trend,
    classical: f64,
}

fn parse_tie(tie: &str) -> Result<TiePolicy, String> {
    match tie {
        "error" => Ok(TiePolicy::TiesAsError),
        "random" => Ok(TiePolicy::RandomTieBreak),
        other => Err(format!("unknown tie policy {other:?}")),
    }
}

/// Geometric grid `n_min, 2 n_min, ...` up to `n_max`.
pub fn oracle_curve_json(p: f64, rate: f64, n_min: usize, n_max: usize, tie: &str) -> Result<String, String> {
    let tie = parse_tie(tie)?;
    if n_min == 0 || n_max > MAX_ORACLE_N {
        return Err(format!("block lengths must lie in 1..={MAX_ORACLE_N}"));
    }
    let grid: Vec<usize> = std::iter::successors(Some(n_min), |&n| Some(n * 2))
        .take_while(|&n| n <= n_max)
        .collect();
    let fit = exponent_fit(p, rate, &grid, tie).map_err(|e| e.to_string())?;
    let ch = ChannelBsc::new(p).map_err(|e| e.to_string())?;
    let classical = if p > 0.0 {
        classical_exponent(&ch, rate).map_err(|e| e.to_string())?
    } else {
        f64::NAN
    };
    to_json(&OracleCurve {
        p,
        rate,
        tie_policy: tie.label(),
        n: fit.points.iter().map(|g| g.n).collect(),
        ln_pe: fit.points.iter().map(|g| g.ln_pe).collect(),
        slope: fit.fit.slope,
        log_correction: fit.fit.log_correction,
        intercept: fit.fit.intercept,
        per_step_slopes: fit.fit.per_step_slopes,
        trend: fit.fit.trend,
        classical,
    })
}

#[derive(Serialize)]
struct Histogram {
    z: f64,
    rate: f64,
    n: usize,
    m: u64,
    samples: u64,
    lo: f64,
    width: f64,
    counts: Vec<u64>,
    mean_ln_s: f64,
    median_ln_s: f64,
    centre: f64,
    threshold: f64,
    violation_frequency: f64,
    predicted_ln_s: Option<f64>,
}

/// Histogram of `ln S` at `z = p/(1-p)` and `M = round(e^{Rn})`.
pub fn statsum_histogram_json(p: f64, rate: f64, n: usize, samples: u64, seed: u64, bins: usize) -> Result<String, String> {
    if !(0.0 < p && p < 1.0) {
        return Err("p must lie in (0, 1)".into());
    }
    if samples == 0 || samples > MAX_SAMPLES {
        return Err(format!("samples must lie in 1..={MAX_SAMPLES}"));
    }
    if bins == 0 || bins > 500 {
        return Err("bins must lie in 1..=500".into());
    }
    let z = p / (1.0 - p);
    let report = theorem2_check(z, rate, n, samples, seed).map_err(|e| e.to_string())?;
    let draws = bsc_exponent::statsum::sample_statsum(z, report.m, n, samples, seed).map_err(|e| e.to_string())?;
    let ln_s: Vec<f64> = draws.iter().map(|d| d.ln_s).collect();
    let lo = ln_s.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ln_s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0u64; bins];
    for v in &ln_s {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    to_json(&Histogram {
        z,
        rate,
        n,
        m: report.m,
        samples,
        lo,
        width,
        counts,
        mean_ln_s: report.mean_ln_s,
        median_ln_s: report.median_ln_s,
        centre: (report.m as f64).ln() + 0.5 * n as f64 * z.ln(),
        threshold: report.threshold,
        violation_frequency: report.violation_frequency,
        predicted_ln_s: report.predicted_ln_s,
    })
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn exponent_curves(p: f64, points: usize) -> Result<String, JsError> {
    js(exponent_curves_json(p, points))
}

#[wasm_bindgen]
pub fn oracle_curve(p: f64, rate: f64, n_min: usize, n_max: usize, tie: &str) -> Result<String, JsError> {
    js(oracle_curve_json(p, rate, n_min, n_max, tie))
}

#[wasm_bindgen]
pub fn statsum_histogram(p: f64, rate: f64, n: usize, samples: u32, seed: u32, bins: usize) -> Result<String, JsError> {
    js(statsum_histogram_json(p, rate, n, samples as u64, seed as u64, bins))
}

#[wasm_bindgen]
pub fn version() -> String {
    bsc_exponent::VERSION.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: Result<String, String>) -> Value {
        serde_json::from_str(&s.unwrap()).unwrap()
    }

    #[test]
    fn curves_end_at_capacity_with_zero_exponent() {
        let v = parse(exponent_curves_json(0.1, 41));
        let pts = v["points"].as_array().unwrap();
        assert_eq!(pts.len(), 41);
        let last = &pts[40];
        assert_eq!(last["rate"], v["capacity"]);
        assert!(last["classical"].as_f64().unwrap().abs() < 1e-9);
        for w in pts.windows(2) {
            assert!(w[1]["classical"].as_f64().unwrap() <= w[0]["classical"].as_f64().unwrap() + 1e-12);
        }
    }

    #[test]
    fn curves_reject_bad_input() {
        assert!(exponent_curves_json(0.7, 10).is_err());
        assert!(exponent_curves_json(0.1, 1).is_err());
        assert!(parse(exponent_curves_json(0.0, 5))["points"][1]["classical"].is_null());
    }

    #[test]
    fn oracle_curve_doubles_n() {
        let v = parse(oracle_curve_json(0.1, 0.3, 64, 600, "error"));
        let n: Vec<u64> = v["n"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
        assert_eq!(n, [64, 128, 256, 512]);
        assert!(v["slope"].as_f64().unwrap() > 0.0);
        assert!(oracle_curve_json(0.1, 0.3, 64, 600, "coin").is_err());
        assert!(oracle_curve_json(0.1, 0.3, 64, 200, "error").is_err(), "fit needs three points");
    }

    #[test]
    fn histogram_counts_every_sample() {
        let v = parse(statsum_histogram_json(0.1, 0.1, 40, 500, 3, 25));
        let total: u64 = v["counts"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).sum();
        assert_eq!(total, 500);
        assert_eq!(v["m"].as_u64().unwrap(), 55);
        assert_eq!(
            statsum_histogram_json(0.1, 0.1, 40, 500, 3, 25).unwrap(),
            statsum_histogram_json(0.1, 0.1, 40, 500, 3, 25).unwrap()
        );
    }
}

use bsc_exponent::exponents::{
    b0, capacity, classical_exponent, printed_exponent, restricted_variational_exponent,
};
use bsc_exponent::oracle::{exact_error_probability, exponent_fit, log_m_for_rate, GridPoint};
use bsc_exponent::simulator::estimate_error_probability;
use bsc_exponent::statsum::theorem2_check;
use bsc_exponent::{ChannelBsc, RatePoint};
use serde::{Deserialize, Serialize};

use crate::settings::{Defaults, Format, RateDefault, Settings};
use crate::{render_rows, CliError};

pub const EXPONENT_DEFAULTS: Defaults = Defaults {
    p: 0.1,
    rates: RateDefault::SweepToCapacity(21),
    n_grid: "1",
    trials: 1,
    samples: 1,
    format: Format::Csv,
};

pub const ORACLE_DEFAULTS: Defaults = Defaults {
    p: 0.1,
    rates: RateDefault::List(&[0.3]),
    n_grid: "512..8192:geometric",
    trials: 1,
    samples: 1,
    format: Format::Csv,
};

pub const SIMULATE_DEFAULTS: Defaults = Defaults {
    p: 0.1,
    rates: RateDefault::List(&[0.2]),
    n_grid: "16",
    trials: 10_000,
    samples: 1,
    format: Format::Csv,
};

pub const STATSUM_DEFAULTS: Defaults = Defaults {
    p: 0.1,
    rates: RateDefault::List(&[0.1]),
    n_grid: "40",
    trials: 1,
    samples: 10_000,
    format: Format::Csv,
};

fn linear_or_none(ln: f64) -> Option<f64> {
    ln.is_finite().then_some(ln)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentRow {
    pub p: f64,
    #[serde(rename = "R")]
    pub rate: f64,
    #[serde(rename = "delta_R")]
    pub delta_r: f64,
    pub r0: f64,
    pub b0: f64,
    #[serde(rename = "R_cr")]
    pub r_cr: f64,
    #[serde(rename = "R_crit")]
    pub r_crit: Option<f64>,
    #[serde(rename = "C")]
    pub capacity: f64,
    pub branch1: Option<f64>,
    pub branch2: f64,
    pub branch3: f64,
    pub restricted_variational: Option<f64>,
    pub classical: Option<f64>,
    pub selected: String,
}

pub fn exponent_rows(s: &Settings) -> Result<Vec<ExponentRow>, CliError> {
    let ch = ChannelBsc::new(s.p)?;
    s.rates
        .iter()
        .map(|&r| {
            let rp = RatePoint::new(&ch, r)?;
            let br = printed_exponent(&ch, r)?;
            let noisy = s.p > 0.0;
            Ok(ExponentRow {
                p: s.p,
                rate: r,
                delta_r: rp.delta_r,
                r0: rp.r0,
                b0: b0(&ch),
                r_cr: br.r_cr,
                r_crit: br.r_crit,
                capacity: capacity(&ch),
                branch1: br.branch1,
                branch2: br.branch2,
                branch3: br.branch3,
                restricted_variational: if noisy {
                    Some(restricted_variational_exponent(&ch, r)?.exponent)
                } else {
                    None
                },
                classical: if noisy { Some(classical_exponent(&ch, r)?) } else { None },
                selected: br.selected.label().to_string(),
            })
        })
        .collect()
}

pub fn exponents(s: &Settings) -> Result<Vec<u8>, CliError> {
    let rows = exponent_rows(s)?;
    render_rows(s.format, &rows, &rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub p: f64,
    #[serde(rename = "R")]
    pub rate: f64,
    pub n: usize,
    #[serde(rename = "log_M")]
    pub log_m: f64,
    pub tie_policy: String,
    #[serde(rename = "ln_Pe")]
    pub ln_pe: f64,
    /// `Δ(-ln P_e) / Δn` from the previous grid point.
    pub per_step_slope: Option<f64>,
}

#[derive(Serialize)]
struct OracleJson<'a> {
    #[serde(flatten)]
    row: &'a OracleRow,
    #[serde(rename = "Pe")]
    pe: f64,
}

pub fn oracle_rows(s: &Settings) -> Result<Vec<OracleRow>, CliError> {
    let mut rows = Vec::new();
    for &r in &s.rates {
        let points: Vec<GridPoint> = if s.n_grid.len() >= 3 {
            exponent_fit(s.p, r, &s.n_grid, s.tie)?.points
        } else {
            s.n_grid
                .iter()
                .map(|&n| {
                    let log_m = log_m_for_rate(r, n);
                    let res = exact_error_probability(n, log_m, s.p, s.tie)?;
                    Ok(GridPoint {
                        n,
                        log_m,
                        ln_pe: res.log_pe.ln(),
                    })
                })
                .collect::<Result<_, CliError>>()?
        };
        for (i, pt) in points.iter().enumerate() {
            let per_step_slope = (i > 0).then(|| {
                let prev = &points[i - 1];
                (prev.ln_pe - pt.ln_pe) / (pt.n - prev.n) as f64
            });
            rows.push(OracleRow {
                p: s.p,
                rate: r,
                n: pt.n,
                log_m: pt.log_m,
                tie_policy: s.tie.label().to_string(),
                ln_pe: pt.ln_pe,
                per_step_slope: per_step_slope.and_then(linear_or_none),
            });
        }
    }
    Ok(rows)
}

pub fn oracle(s: &Settings) -> Result<Vec<u8>, CliError> {
    let rows = oracle_rows(s)?;
    let json: Vec<OracleJson> = rows.iter().map(|row| OracleJson { row, pe: row.ln_pe.exp() }).collect();
    render_rows(s.format, &rows, &json)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateRow {
    pub p: f64,
    #[serde(rename = "R")]
    pub rate: f64,
    pub n: usize,
    pub mode: String,
    pub tie_policy: String,
    pub trials: u64,
    pub errors: u64,
    pub estimate: f64,
    pub ci_half_width: f64,
    pub seed: u64,
}

#[derive(Serialize)]
struct SimulateJson<'a> {
    #[serde(flatten)]
    row: &'a SimulateRow,
    /// `None` when no errors were seen.
    ln_estimate: Option<f64>,
}

pub fn simulate_rows(s: &Settings) -> Result<Vec<SimulateRow>, CliError> {
    let mut rows = Vec::new();
    for &r in &s.rates {
        for &n in &s.n_grid {
            let t = estimate_error_probability(s.p, r, n, s.trials, s.mode, s.tie, s.seed)?;
            rows.push(SimulateRow {
                p: s.p,
                rate: r,
                n,
                mode: t.mode.label().to_string(),
                tie_policy: t.tie.label().to_string(),
                trials: t.trials,
                errors: t.errors,
                estimate: t.estimate,
                ci_half_width: t.ci_half_width,
                seed: t.seed,
            });
        }
    }
    Ok(rows)
}

pub fn simulate(s: &Settings) -> Result<Vec<u8>, CliError> {
    let rows = simulate_rows(s)?;
    let json: Vec<SimulateJson> = rows
        .iter()
        .map(|row| SimulateJson {
            row,
            ln_estimate: linear_or_none(row.estimate.ln()),
        })
        .collect();
    render_rows(s.format, &rows, &json)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsumRow {
    pub z: f64,
    #[serde(rename = "R")]
    pub rate: f64,
    pub n: usize,
    #[serde(rename = "M")]
    pub m: u64,
    pub samples: u64,
    #[serde(rename = "mean_lnS")]
    pub mean_ln_s: f64,
    #[serde(rename = "median_lnS")]
    pub median_ln_s: f64,
    pub threshold: f64,
    pub violation_frequency: f64,
    pub ln_bound: f64,
    pub predicted_per_symbol: Option<f64>,
}

#[derive(Serialize)]
struct StatsumJson<'a> {
    #[serde(flatten)]
    row: &'a StatsumRow,
    ln_violation_frequency: Option<f64>,
    bound: f64,
}

/// `z = p / (1 - p)`, so `p = 1/2` gives `z = 1`.
pub fn z_of(p: f64) -> f64 {
    p / (1.0 - p)
}

pub fn statsum_rows(s: &Settings) -> Result<Vec<StatsumRow>, CliError> {
    let z = z_of(s.p);
    let mut rows = Vec::new();
    for &r in &s.rates {
        for &n in &s.n_grid {
            let t = theorem2_check(z, r, n, s.samples, s.seed)?;
            rows.push(StatsumRow {
                z,
                rate: r,
                n,
                m: t.m,
                samples: t.samples,
                mean_ln_s: t.mean_ln_s,
                median_ln_s: t.median_ln_s,
                threshold: t.threshold,
                violation_frequency: t.violation_frequency,
                ln_bound: t.ln_bound,
                predicted_per_symbol: t.predicted_per_symbol,
            });
        }
    }
    Ok(rows)
}

pub fn statsum(s: &Settings) -> Result<Vec<u8>, CliError> {
    let rows = statsum_rows(s)?;
    let json: Vec<StatsumJson> = rows
        .iter()
        .map(|row| StatsumJson {
            row,
            ln_violation_frequency: linear_or_none(row.violation_frequency.ln()),
            bound: row.ln_bound.exp(),
        })
        .collect();
    render_rows(s.format, &rows, &json)
}

//! The statistical sum `S(z, M, n) = Σ_j z^{w_j}` over the weights of `M`
//! random codewords, with a concentration checker and a typical-value
//! predictor.
//!
//! `typical_log_statsum` is not taken from the analysis being checked; it
//! estimates `(1/n) ln S` by the largest populated weight class and is used
//! to judge the concentration measurements.

use std::f64::consts::LN_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::binary_entropy;
use crate::logmath::{bisect_monotone, log_sum_exp_f64};
use crate::optimize::maximize_piecewise;
use crate::oracle::log_m_for_rate;
use crate::rng::{stream, Purpose};

/// Largest `M` sampled directly.
pub const MAX_SAMPLED_M: u64 = 10_000_000;

const GRID_STEP: f64 = 1e-3;
const GOLDEN_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatSumSample {
    pub z: f64,
    pub n: usize,
    pub log_m: f64,
    pub ln_s: f64,
    /// `|ln S - ln M - (n/2) ln z|`
    pub deviation: f64,
    /// `sqrt(n ln(n+1)) |ln z|`
    pub threshold: f64,
    /// Smallest weight drawn, for the largest-term bound.
    pub min_weight: u32,
}

pub fn threshold(n: usize, ln_z: f64) -> f64 {
    let n = n as f64;
    (n * (n + 1.0).ln()).sqrt() * ln_z.abs()
}

fn check_z(z: f64) -> Result<f64> {
    if z.is_nan() {
        return Err(Error::NaN);
    }
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::OutOfRange {
            what: "z",
            value: z,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    Ok(z.ln())
}

fn check_sizes(m: u64, n: usize) -> Result<()> {
    if m == 0 || n == 0 {
        return Err(Error::Invalid("need M >= 1 and n >= 1".into()));
    }
    if m > MAX_SAMPLED_M {
        return Err(Error::Cap {
            requested: m as u128,
            cap: MAX_SAMPLED_M as u128,
        });
    }
    Ok(())
}

/// Weights of `m` fair `n`-bit words drawn from sample `i`'s stream.
fn draw_weights(m: u64, n: usize, seed: u64, i: u64) -> Vec<u32> {
    let mut rng = stream(seed, Purpose::Weights, i);
    let full = n / 64;
    let rest = n % 64;
    (0..m)
        .map(|_| {
            let mut w = 0;
            for _ in 0..full {
                w += rng.random::<u64>().count_ones();
            }
            if rest > 0 {
                w += (rng.random::<u64>() & ((1u64 << rest) - 1)).count_ones();
            }
            w
        })
        .collect()
}

/// Build a sample from raw weights. The sum is centred at `n/2` before
/// exponentiation so that `(z, w)` and `(1/z, n - w)` give the same deviation
/// bit for bit.
fn summarize(weights: &[u32], n: usize, ln_z: f64, z: f64) -> StatSumSample {
    let log_m = (weights.len() as f64).ln();
    let half = n as f64 / 2.0;
    let centred = if ln_z == 0.0 {
        log_m
    } else {
        log_sum_exp_f64(weights.iter().map(|&w| (w as f64 - half) * ln_z))
    };
    let shift = if ln_z == 0.0 { 0.0 } else { half * ln_z };
    StatSumSample {
        z,
        n,
        log_m,
        ln_s: centred + shift,
        deviation: (centred - log_m).abs(),
        threshold: threshold(n, ln_z),
        min_weight: weights.iter().copied().min().unwrap_or(0),
    }
}

fn collect<T: Send, F: Fn(u64) -> T + Sync + Send>(count: u64, f: F) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// `samples` independent draws of `ln S(z, M, n)`.
pub fn sample_statsum(z: f64, m: u64, n: usize, samples: u64, seed: u64) -> Result<Vec<StatSumSample>> {
    let ln_z = check_z(z)?;
    check_sizes(m, n)?;
    Ok(collect(samples, |i| summarize(&draw_weights(m, n, seed, i), n, ln_z, z)))
}

/// Exact mean and standard deviation of one draw of `S(z, M, n)`:
/// `E S = M ((1+z)/2)^n`, `Var S = M [((1+z²)/2)^n - ((1+z)/2)^{2n}]`.
pub fn statsum_mean_and_sd(z: f64, m: u64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let m = m as f64;
    let first = ((1.0 + z) / 2.0).powf(nf);
    let second = ((1.0 + z * z) / 2.0).powf(nf);
    (m * first, (m * (second - first * first)).max(0.0).sqrt())
}

/// Draws at `z` and at `1/z` from the same weight streams, the second with
/// every weight complemented (`w -> n - w`). The two deviation sequences are
/// identical.
pub fn sample_statsum_paired(
    z: f64,
    m: u64,
    n: usize,
    samples: u64,
    seed: u64,
) -> Result<(Vec<StatSumSample>, Vec<StatSumSample>)> {
    let ln_z = check_z(z)?;
    check_sizes(m, n)?;
    let pairs = collect(samples, |i| {
        let w = draw_weights(m, n, seed, i);
        let flipped: Vec<u32> = w.iter().map(|&x| n as u32 - x).collect();
        (summarize(&w, n, ln_z, z), summarize(&flipped, n, -ln_z, 1.0 / z))
    });
    Ok(pairs.into_iter().unzip())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Report {
    pub z: f64,
    pub rate: f64,
    pub n: usize,
    pub m: u64,
    pub samples: u64,
    /// Fraction of samples with `deviation > threshold` (strict).
    pub violation_frequency: f64,
    /// `ln (n+1)^{-M}`.
    pub ln_bound: f64,
    pub threshold: f64,
    pub mean_ln_s: f64,
    pub median_ln_s: f64,
    /// `n` times the per-symbol typical value from [`typical_log_statsum`].
    pub predicted_ln_s: Option<f64>,
    pub predicted_per_symbol: Option<f64>,
    /// `n < 10`, outside the claimed range.
    pub small_n: bool,
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}

/// Sample `S` at `M = round(e^{Rn})` and count deviations beyond the
/// threshold `sqrt(n ln(n+1)) |ln z|`.
pub fn theorem2_check(z: f64, rate: f64, n: usize, samples: u64, seed: u64) -> Result<Theorem2Report> {
    let ln_z = check_z(z)?;
    if samples == 0 {
        return Err(Error::Invalid("need samples >= 1".into()));
    }
    let log_m = log_m_for_rate(rate, n);
    if log_m > (MAX_SAMPLED_M as f64).ln() + 1e-9 {
        return Err(Error::Cap {
            requested: log_m.exp().min(u128::MAX as f64) as u128,
            cap: MAX_SAMPLED_M as u128,
        });
    }
    let m = log_m.exp().round() as u64;
    let draws = sample_statsum(z, m, n, samples, seed)?;
    let violations = draws.iter().filter(|s| s.deviation > s.threshold).count();
    let ln_s: Vec<f64> = draws.iter().map(|s| s.ln_s).collect();
    let predicted = if rate > 0.0 && rate <= LN_2 {
        Some(typical_log_statsum(z, rate)?.per_symbol)
    } else {
        None
    };
    Ok(Theorem2Report {
        z,
        rate,
        n,
        m,
        samples,
        violation_frequency: violations as f64 / samples as f64,
        ln_bound: -(m as f64) * ((n + 1) as f64).ln(),
        threshold: threshold(n, ln_z),
        mean_ln_s: ln_s.iter().sum::<f64>() / samples as f64,
        median_ln_s: median(ln_s),
        predicted_ln_s: predicted.map(|v| v * n as f64),
        predicted_per_symbol: predicted,
        small_n: n < 10,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypicalValue {
    pub per_symbol: f64,
    pub b_star: f64,
}

/// `max_{b in [δ_R, 1-δ_R]} R - ln2 + h(b) + b ln z`, where `ln2 - h(δ_R) = R`:
/// the weight classes `b` that a code of rate `R` actually populates.
pub fn typical_log_statsum(z: f64, rate: f64) -> Result<TypicalValue> {
    let ln_z = check_z(z)?;
    if rate.is_nan() {
        return Err(Error::NaN);
    }
    if !(rate > 0.0 && rate <= LN_2) {
        return Err(Error::OutOfRange {
            what: "R",
            value: rate,
            lo: 0.0,
            hi: LN_2,
        });
    }
    let h = |x: f64| binary_entropy(x).unwrap_or(f64::NAN);
    let delta = if rate == LN_2 {
        0.0
    } else {
        bisect_monotone(h, 0.0, 0.5, LN_2 - rate, 1e-16)?
    };
    let f = |b: f64| rate - LN_2 + h(b) + b * ln_z;
    let m = maximize_piecewise(&f, delta, 1.0 - delta, &[], GRID_STEP, GOLDEN_TOL);
    Ok(TypicalValue {
        per_symbol: m.value,
        b_star: m.arg,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteRadius {
    /// `1/2 - sqrt(ln(n+1)/n) + ln(M-1) / (n ln z)`, unclamped.
    pub r: f64,
    /// `1/2 + R / ln z` with `R = ln M / n`.
    pub r0: f64,
}

pub fn finite_n_radius(n: usize, z: f64, m: u64) -> Result<FiniteRadius> {
    let ln_z = check_z(z)?;
    if m < 2 {
        return Err(Error::Invalid("finite-n radius needs M >= 2".into()));
    }
    let r = finite_n_radius_log(n, ln_z, ((m - 1) as f64).ln())?;
    Ok(FiniteRadius {
        r,
        r0: 0.5 + (m as f64).ln() / n as f64 / ln_z,
    })
}

/// [`finite_n_radius`] from `ln z` and `ln(M-1)`, for `M` beyond integers.
pub fn finite_n_radius_log(n: usize, ln_z: f64, ln_m_minus_one: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Invalid("finite-n radius needs n >= 1".into()));
    }
    if ln_z == 0.0 || !ln_z.is_finite() {
        return Err(Error::Invalid("finite-n radius needs z != 1 and z finite".into()));
    }
    if ln_m_minus_one.is_nan() || ln_m_minus_one == f64::NEG_INFINITY {
        return Err(Error::Invalid("finite-n radius needs M >= 2".into()));
    }
    let nf = n as f64;
    Ok(0.5 - ((nf + 1.0).ln() / nf).sqrt() + ln_m_minus_one / (nf * ln_z))
}

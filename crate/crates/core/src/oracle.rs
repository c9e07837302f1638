//! Exact ensemble-average error probability of minimum-distance decoding.
//!
//! For the iid equiprobable ensemble, the `M - 1` competitor distances to the
//! channel output are iid `Bin(n, 1/2)` and independent of the transmitted
//! word's distance `d_m ~ Bin(n, p)`. Conditioning on `d_m` therefore gives a
//! closed form per distance, and the average is a finite sum over `d`.
//!
//! `M` is carried as `ln M` throughout: at rate `R` it is `e^{Rn}`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::logmath::{
    log1mexp, log1mexp_neg_exp, log_add, log_neg_log1mexp, log_sum_exp_f64, BinomialTable, LogReal,
};
use crate::statsum::finite_n_radius_log;

/// How a tie at the minimum distance is scored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TiePolicy {
    /// Any competitor at distance `<= d_m` is an error.
    #[default]
    TiesAsError,
    /// Uniform choice among all minimizers.
    RandomTieBreak,
}

impl TiePolicy {
    pub fn label(self) -> &'static str {
        match self {
            TiePolicy::TiesAsError => "error",
            TiePolicy::RandomTieBreak => "random",
        }
    }
}

impl std::str::FromStr for TiePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error" | "ties-as-error" => Ok(TiePolicy::TiesAsError),
            "random" | "random-tie-break" => Ok(TiePolicy::RandomTieBreak),
            other => Err(Error::Invalid(format!("unknown tie policy '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub n: usize,
    pub log_m: f64,
    pub p: f64,
    pub tie: TiePolicy,
    pub log_pe: LogReal,
    /// `(d, ln[P{d_m = d} P{error | d}])`, kept within `e^-40` of the largest.
    pub per_distance: Vec<(usize, LogReal)>,
    /// Total contribution from `d < r n`, with `r` the finite-n radius.
    /// `None` when the radius is undefined (`z` not in `(0, 1)` or `M < 2`).
    pub below_radius_mass: Option<LogReal>,
}

const PER_DISTANCE_WINDOW: f64 = 40.0;
/// Below this `M δ` the random-tie-break formula switches to its series.
const SERIES_SWITCH: f64 = 0.1;

/// `ln(M - 1)` from `ln M`; `-inf` when `M = 1`.
pub fn log_m_minus_one(log_m: f64) -> f64 {
    if log_m == 0.0 {
        f64::NEG_INFINITY
    } else {
        log_m + log1mexp(-log_m)
    }
}

/// `ln M` for `M = round(e^{Rn})`, at least 2. Past `e^700` the rounding is
/// meaningless and `Rn` is returned as is.
pub fn log_m_for_rate(rate: f64, n: usize) -> f64 {
    let x = rate * n as f64;
    if x >= 700.0 {
        return x;
    }
    x.exp().round().max(2.0).ln()
}

/// Per-distance evaluator sharing one binomial table.
struct Conditional<'a> {
    table: &'a BinomialTable,
    log_m: f64,
    log_m1: f64,
}

impl<'a> Conditional<'a> {
    fn new(table: &'a BinomialTable, log_m: f64) -> Self {
        Conditional {
            table,
            log_m,
            log_m1: log_m_minus_one(log_m),
        }
    }

    fn cdf(&self, d: usize) -> f64 {
        self.table.log_cdf(d).expect("d checked by caller").ln()
    }

    fn sf(&self, d: usize) -> f64 {
        self.table.log_sf(d).expect("d checked by caller").ln()
    }

    /// `ln(-ln(1 - F(d)))`, choosing whichever tail is accurate.
    fn log_rate_below_or_at(&self, d: usize) -> f64 {
        let lf = self.cdf(d);
        if lf < -LN_2 {
            log_neg_log1mexp(lf)
        } else {
            (-self.sf(d)).ln()
        }
    }

    fn error(&self, d: usize, tie: TiePolicy) -> f64 {
        if self.log_m1 == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        match tie {
            TiePolicy::TiesAsError => self.error_ties(d),
            TiePolicy::RandomTieBreak => self.error_random(d),
        }
    }

    /// `1 - (1 - F(d))^{M-1}`.
    fn error_ties(&self, d: usize) -> f64 {
        let x = self.log_m1 + self.log_rate_below_or_at(d);
        log1mexp_neg_exp(x)
    }

    /// `1 - [(t+s)^M - s^M] / (M t)` with `t = P{X = d}`, `s = P{X > d}`.
    ///
    /// Written as `e^{-(M-1)λ} (1 - e^{-Mδ}) / (M (1 - e^{-δ}))` with
    /// `λ = -ln P{X >= d}` and `δ = -ln(1 - t / P{X >= d})`.
    fn error_random(&self, d: usize) -> f64 {
        let (log_lambda, log_u) = if d == 0 {
            (f64::NEG_INFINITY, 0.0)
        } else {
            (self.log_rate_below_or_at(d - 1), self.sf(d - 1))
        };
        let log_t = self.table.log_pmf_half(d).expect("d checked by caller").ln();
        let log_delta = log_neg_log1mexp((log_t - log_u).min(0.0));

        if self.log_m + log_delta < SERIES_SWITCH.ln() {
            return self.error_random_series(log_lambda, log_delta);
        }
        let ln_correct = -(self.log_m1 + log_lambda).exp() - self.log_m - log1mexp_neg_exp(log_delta)
            + log1mexp_neg_exp(self.log_m + log_delta);
        log1mexp(ln_correct.min(0.0))
    }

    /// Series of `-ln(correct)` in powers of `Mδ`:
    /// `(M-1)(λ + δ/2) - (M²-1)δ²/24 + (M⁴-1)δ⁴/2880 - ...`.
    fn error_random_series(&self, log_lambda: f64, log_delta: f64) -> f64 {
        // Coefficients of w^{2k} in ln((1 - e^{-w}) / w).
        const COEFFS: [f64; 4] = [1.0 / 24.0, -1.0 / 2880.0, 1.0 / 181_440.0, -1.0 / 9_676_800.0];
        let log_a = self.log_m1 + log_add(log_lambda, log_delta - LN_2);
        let mut ratio = 0.0;
        for (k, c) in COEFFS.iter().enumerate() {
            let two_k = 2.0 * (k + 1) as f64;
            let log_pow = two_k * self.log_m + log1mexp(-two_k * self.log_m);
            ratio += c * (log_pow + two_k * log_delta - log_a).exp();
        }
        let log_neg_ln_correct = log_a + (-ratio).ln_1p();
        log1mexp_neg_exp(log_neg_ln_correct)
    }
}

fn check_log_m(log_m: f64) -> Result<()> {
    if log_m.is_nan() || log_m < 0.0 {
        return Err(Error::Invalid(format!("ln M = {log_m} must be >= 0 (M >= 1)")));
    }
    Ok(())
}

/// `ln P{error | d_m = d}` over the random ensemble.
pub fn error_prob_given_distance(n: usize, log_m: f64, d: usize, tie: TiePolicy) -> Result<LogReal> {
    check_log_m(log_m)?;
    let table = BinomialTable::new(n)?;
    error_prob_given_distance_with(&table, log_m, d, tie)
}

/// As [`error_prob_given_distance`] but reusing a table for `n`.
pub fn error_prob_given_distance_with(
    table: &BinomialTable,
    log_m: f64,
    d: usize,
    tie: TiePolicy,
) -> Result<LogReal> {
    check_log_m(log_m)?;
    if d > table.n() {
        return Err(Error::OutOfRange {
            what: "d",
            value: d as f64,
            lo: 0.0,
            hi: table.n() as f64,
        });
    }
    LogReal::new(Conditional::new(table, log_m).error(d, tie))
}

/// Exact `P_e(n, M, p)` averaged over codes and messages.
pub fn exact_error_probability(n: usize, log_m: f64, p: f64, tie: TiePolicy) -> Result<OracleResult> {
    check_range("p", p, 0.0, 0.5)?;
    check_log_m(log_m)?;
    let table = BinomialTable::new(n)?;
    let cond = Conditional::new(&table, log_m);
    let log_p = LogReal::new(p.ln())?;
    let log_q = LogReal::new((-p).ln_1p())?;

    let mut contributions = Vec::with_capacity(n + 1);
    for d in 0..=n {
        let prior = table.log_pmf(d, log_p, log_q)?.ln();
        let term = if prior == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            prior + cond.error(d, tie)
        };
        if term.is_nan() {
            return Err(Error::NaN);
        }
        contributions.push(term);
    }
    let log_pe = log_sum_exp_f64(contributions.iter().copied()).min(0.0);

    let peak = contributions.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let per_distance = contributions
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > f64::NEG_INFINITY && **v >= peak - PER_DISTANCE_WINDOW)
        .map(|(d, v)| (d, LogReal::new(*v).expect("checked above")))
        .collect();

    let ln_z = log_p.ln() - log_q.ln();
    let below_radius_mass = if ln_z.is_finite() && ln_z < 0.0 && cond.log_m1 > f64::NEG_INFINITY {
        let r = finite_n_radius_log(n, ln_z, cond.log_m1)?;
        let cut = r * n as f64;
        let mass = log_sum_exp_f64(
            contributions
                .iter()
                .enumerate()
                .filter(|(d, _)| (*d as f64) < cut)
                .map(|(_, v)| *v),
        );
        Some(LogReal::new(mass)?)
    } else {
        None
    };

    Ok(OracleResult {
        n,
        log_m,
        p,
        tie,
        log_pe: LogReal::new(log_pe)?,
        per_distance,
        below_radius_mass,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    Increasing,
    Decreasing,
    Constant,
    Mixed,
}

/// Least-squares fit of `-ln P(n) = E n + c ln n + a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub log_correction: f64,
    pub intercept: f64,
    /// `Δ(-ln P) / Δn` between consecutive grid points.
    pub per_step_slopes: Vec<f64>,
    pub trend: Trend,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n: usize,
    pub log_m: f64,
    pub ln_pe: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub p: f64,
    pub rate: f64,
    pub tie: TiePolicy,
    pub points: Vec<GridPoint>,
    pub fit: SlopeFit,
}

fn trend_of(values: &[f64]) -> Trend {
    let ups = values.windows(2).filter(|w| w[1] > w[0]).count();
    let downs = values.windows(2).filter(|w| w[1] < w[0]).count();
    match (ups, downs) {
        (0, 0) => Trend::Constant,
        (_, 0) => Trend::Increasing,
        (0, _) => Trend::Decreasing,
        _ => Trend::Mixed,
    }
}

/// Fit `y = E n + c ln n + a` by modified Gram-Schmidt QR.
pub fn fit_exponent(ns: &[usize], neg_ln_p: &[f64]) -> Result<SlopeFit> {
    let strictly_increasing = ns.windows(2).all(|w| w[0] < w[1]);
    if ns.len() < 3 || ns.len() != neg_ln_p.len() || !strictly_increasing || ns[0] == 0 {
        return Err(Error::Grid {
            needed: 3,
            got: ns.len(),
        });
    }
    if let Some(bad) = neg_ln_p.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(*bad));
    }

    let rows = ns.len();
    let mut cols: [Vec<f64>; 3] = [
        ns.iter().map(|&n| n as f64).collect(),
        ns.iter().map(|&n| (n as f64).ln()).collect(),
        vec![1.0; rows],
    ];
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut r = [[0.0f64; 3]; 3];
    for j in 0..3 {
        for i in 0..j {
            let proj = dot(&cols[i], &cols[j]);
            r[i][j] = proj;
            let qi = cols[i].clone();
            for (x, q) in cols[j].iter_mut().zip(&qi) {
                *x -= proj * q;
            }
        }
        let norm = dot(&cols[j], &cols[j]).sqrt();
        if norm == 0.0 {
            return Err(Error::Invalid("degenerate fit design".into()));
        }
        r[j][j] = norm;
        for x in cols[j].iter_mut() {
            *x /= norm;
        }
    }
    let qty: Vec<f64> = (0..3).map(|j| dot(&cols[j], neg_ln_p)).collect();
    let mut coef = [0.0; 3];
    for j in (0..3).rev() {
        let tail: f64 = (j + 1..3).map(|k| r[j][k] * coef[k]).sum();
        coef[j] = (qty[j] - tail) / r[j][j];
    }

    let per_step_slopes: Vec<f64> = ns
        .windows(2)
        .zip(neg_ln_p.windows(2))
        .map(|(n, y)| (y[1] - y[0]) / (n[1] - n[0]) as f64)
        .collect();
    let trend = trend_of(&per_step_slopes);
    Ok(SlopeFit {
        slope: coef[0],
        log_correction: coef[1],
        intercept: coef[2],
        per_step_slopes,
        trend,
    })
}

/// Oracle exponent at rate `R`: evaluate `P_e` on the grid with
/// `M = round(e^{Rn})` and fit the decay.
pub fn exponent_fit(p: f64, rate: f64, n_grid: &[usize], tie: TiePolicy) -> Result<ExponentFit> {
    if n_grid.len() < 3 || !n_grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Grid {
            needed: 3,
            got: n_grid.len(),
        });
    }
    if rate.is_nan() || rate < 0.0 {
        return Err(Error::Invalid(format!("rate {rate} must be >= 0")));
    }
    let eval = |&n: &usize| -> Result<GridPoint> {
        let log_m = log_m_for_rate(rate, n);
        let res = exact_error_probability(n, log_m, p, tie)?;
        Ok(GridPoint {
            n,
            log_m,
            ln_pe: res.log_pe.ln(),
        })
    };

    #[cfg(feature = "parallel")]
    let points: Result<Vec<GridPoint>> = {
        use rayon::prelude::*;
        n_grid.par_iter().map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let points: Result<Vec<GridPoint>> = n_grid.iter().map(eval).collect();
    let points = points?;

    let ys: Vec<f64> = points.iter().map(|pt| -pt.ln_pe).collect();
    let fit = fit_exponent(n_grid, &ys)?;
    Ok(ExponentFit {
        p,
        rate,
        tie,
        points,
        fit,
    })
}

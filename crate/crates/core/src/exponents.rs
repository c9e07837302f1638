//! Closed-form rates and exponents of the BSC, in nats.
//!
//! Two views of the random-coding exponent live side by side:
//!
//! - [`printed_exponent`] evaluates the three-branch piecewise formula
//!   literally, together with its two thresholds `R_crit` and `R_cr`.
//! - [`restricted_variational_exponent`] and [`classical_exponent`] solve the
//!   underlying program `max_b f2(p, R, b)` numerically, with and without the
//!   constraint `b >= r0`.
//!
//! They are kept separate on purpose; the oracle decides which one the
//! finite-n error probability actually follows.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::logmath::bisect_monotone;
use crate::optimize::{maximize_piecewise, Maximum};

const GRID_STEP: f64 = 1e-3;
const GOLDEN_TOL: f64 = 1e-10;
const DELTA_TOL: f64 = 1e-16;

/// BSC(p) with `0 <= p <= 1/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelBsc {
    p: f64,
    q: f64,
    z: f64,
    ln_z: f64,
}

impl ChannelBsc {
    pub fn new(p: f64) -> Result<Self> {
        check_range("p", p, 0.0, 0.5)?;
        let q = 1.0 - p;
        Ok(ChannelBsc {
            p,
            q,
            z: p / q,
            ln_z: p.ln() - q.ln(),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `p / q`
    pub fn z(&self) -> f64 {
        self.z
    }

    /// `ln(p / q)`; `-inf` for the noiseless channel.
    pub fn ln_z(&self) -> f64 {
        self.ln_z
    }
}

/// A rate with its `δ_R` and `r0` coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub rate: f64,
    pub delta_r: f64,
    pub r0: f64,
}

impl RatePoint {
    pub fn new(ch: &ChannelBsc, rate: f64) -> Result<Self> {
        Ok(RatePoint {
            rate,
            delta_r: delta_from_rate(ch, rate)?,
            r0: r0(ch, rate),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectedBranch {
    Branch1,
    Branch2,
    Branch3,
    /// `R_crit > R_cr` numerically, so the printed ranges do not partition
    /// `[0, C]` and no branch is selected.
    InconsistentThresholds,
}

impl SelectedBranch {
    pub fn label(self) -> &'static str {
        match self {
            SelectedBranch::Branch1 => "branch1",
            SelectedBranch::Branch2 => "branch2",
            SelectedBranch::Branch3 => "branch3",
            SelectedBranch::InconsistentThresholds => "inconsistent-thresholds",
        }
    }
}

/// The three printed branch formulas evaluated at one rate, plus thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchReport {
    pub rate: f64,
    /// `2R - ln2 + 2h(r0) + ln sqrt(pq)`; `None` when `r0` leaves `[0, 1]`.
    pub branch1: Option<f64>,
    /// `ln2 - 2 ln(sqrt q + sqrt p) - R`
    pub branch2: f64,
    /// `E_sp(p, R)`
    pub branch3: f64,
    /// `None` for the noiseless channel, where the printed formula is unbounded.
    pub r_crit: Option<f64>,
    pub r_cr: f64,
    pub capacity: f64,
    pub selected: SelectedBranch,
}

/// Argmax and negated maximum of `f2` over a range of `b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalOptimum {
    pub b_star: f64,
    pub exponent: f64,
}

/// `x ln(x / y)` with `0 ln(0 / y) = 0`.
fn x_ln_x_over_y(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

/// `h(x) = -x ln x - (1-x) ln(1-x)` in nats.
pub fn binary_entropy(x: f64) -> Result<f64> {
    check_range("x", x, 0.0, 1.0)?;
    Ok(-x_ln_x_over_y(x, 1.0) - x_ln_x_over_y(1.0 - x, 1.0))
}

fn h(x: f64) -> f64 {
    -x_ln_x_over_y(x, 1.0) - x_ln_x_over_y(1.0 - x, 1.0)
}

pub fn capacity(ch: &ChannelBsc) -> f64 {
    LN_2 - h(ch.p)
}

/// `b0 = sqrt p / (sqrt q + sqrt p)`
pub fn b0(ch: &ChannelBsc) -> f64 {
    let (sp, sq) = (ch.p.sqrt(), ch.q.sqrt());
    sp / (sq + sp)
}

/// The traditional critical rate `ln2 - h(b0)`.
pub fn critical_rate(ch: &ChannelBsc) -> f64 {
    LN_2 - h(b0(ch))
}

/// `(sqrt q - sqrt p) / (2 (sqrt q + sqrt p)) * ln(q / p)`, evaluated literally.
/// `None` at `p = 0` where the expression is unbounded.
pub fn new_critical_rate(ch: &ChannelBsc) -> Option<f64> {
    if ch.p == 0.0 {
        return None;
    }
    let (sp, sq) = (ch.p.sqrt(), ch.q.sqrt());
    Some((sq - sp) / (2.0 * (sq + sp)) * (-ch.ln_z))
}

/// `E0 = ln2 - 2 ln(sqrt q + sqrt p)`, so that `f2(p, R, b0) = R - E0`
/// whenever the bracket is active.
pub fn gallager_e0(ch: &ChannelBsc) -> f64 {
    LN_2 - 2.0 * (ch.q.sqrt() + ch.p.sqrt()).ln()
}

/// Closed form of `h(b0)`:
/// `ln(sqrt q + sqrt p) - (sqrt p ln p + sqrt q ln q) / (2 (sqrt q + sqrt p))`.
pub fn entropy_of_b0_closed_form(ch: &ChannelBsc) -> f64 {
    let (sp, sq) = (ch.p.sqrt(), ch.q.sqrt());
    let p_term = if ch.p == 0.0 { 0.0 } else { sp * ch.p.ln() };
    (sq + sp).ln() - (p_term + sq * ch.q.ln()) / (2.0 * (sq + sp))
}

/// `r0 = 1/2 + R / ln(p/q)`; exactly 1/2 at `R = 0`.
pub fn r0(ch: &ChannelBsc, rate: f64) -> f64 {
    if rate == 0.0 {
        return 0.5;
    }
    0.5 + rate / ch.ln_z
}

fn check_rate(ch: &ChannelBsc, rate: f64) -> Result<()> {
    check_range("R", rate, 0.0, capacity(ch))
}

/// Solve `ln2 - h(δ) = R` for `δ` in `[p, 1/2]`.
pub fn delta_from_rate(ch: &ChannelBsc, rate: f64) -> Result<f64> {
    check_rate(ch, rate)?;
    if rate == 0.0 {
        return Ok(0.5);
    }
    if rate == capacity(ch) {
        return Ok(ch.p);
    }
    bisect_monotone(h, ch.p, 0.5, LN_2 - rate, DELTA_TOL)
}

/// `E_sp(p, R) = δ ln(δ/p) + (1-δ) ln((1-δ)/q)` with `δ = δ_R`.
pub fn sphere_packing(ch: &ChannelBsc, rate: f64) -> Result<f64> {
    let d = delta_from_rate(ch, rate)?;
    Ok(x_ln_x_over_y(d, ch.p) + x_ln_x_over_y(1.0 - d, ch.q))
}

/// `f1(p, b) = ln q + h(b) + b ln z`, the exponent of `P{d_m = bn}`.
pub fn f1(ch: &ChannelBsc, b: f64) -> Result<f64> {
    check_range("b", b, 0.0, 1.0)?;
    if ch.p == 0.0 && b > 0.0 {
        return Err(Error::Invalid("f1 is -inf for p = 0 and b > 0".into()));
    }
    Ok(f1_unchecked(ch, b))
}

fn f1_unchecked(ch: &ChannelBsc, b: f64) -> f64 {
    let drift = if b == 0.0 { 0.0 } else { b * ch.ln_z };
    ch.q.ln() + h(b) + drift
}

/// `f2(p, R, b) = f1(p, b) - [ln2 - R - h(b)]₊`.
pub fn f2(ch: &ChannelBsc, rate: f64, b: f64) -> Result<f64> {
    check_rate(ch, rate)?;
    let base = f1(ch, b)?;
    Ok(base - bracket(rate, b))
}

fn bracket(rate: f64, b: f64) -> f64 {
    (LN_2 - rate - h(b)).max(0.0)
}

fn f2_unchecked(ch: &ChannelBsc, rate: f64, b: f64) -> f64 {
    f1_unchecked(ch, b) - bracket(rate, b)
}

/// Evaluate the printed three-branch formula and its thresholds.
pub fn printed_exponent(ch: &ChannelBsc, rate: f64) -> Result<BranchReport> {
    check_rate(ch, rate)?;
    let r0v = r0(ch, rate);
    let branch1 = if (0.0..=1.0).contains(&r0v) {
        Some(2.0 * rate - LN_2 + 2.0 * h(r0v) + 0.5 * (ch.p.ln() + ch.q.ln()))
    } else {
        None
    };
    let branch2 = gallager_e0(ch) - rate;
    let branch3 = sphere_packing(ch, rate)?;
    let r_crit = new_critical_rate(ch);
    let r_cr = critical_rate(ch);

    let selected = match r_crit {
        Some(rc) if rc <= r_cr => {
            if rate <= rc {
                SelectedBranch::Branch1
            } else if rate <= r_cr {
                SelectedBranch::Branch2
            } else {
                SelectedBranch::Branch3
            }
        }
        _ => SelectedBranch::InconsistentThresholds,
    };

    Ok(BranchReport {
        rate,
        branch1,
        branch2,
        branch3,
        r_crit,
        r_cr,
        capacity: capacity(ch),
        selected,
    })
}

fn require_noisy(ch: &ChannelBsc) -> Result<()> {
    if ch.p == 0.0 {
        return Err(Error::Invalid("variational exponents need p > 0".into()));
    }
    Ok(())
}

fn maximize_f2(ch: &ChannelBsc, rate: f64, lo: f64) -> Result<Maximum> {
    let d = delta_from_rate(ch, rate)?;
    let f = |b: f64| f2_unchecked(ch, rate, b);
    Ok(maximize_piecewise(&f, lo, 1.0, &[d, 1.0 - d], GRID_STEP, GOLDEN_TOL))
}

/// `-max_{b >= r0} f2(p, R, b)` and its argmax.
pub fn restricted_variational_exponent(ch: &ChannelBsc, rate: f64) -> Result<VariationalOptimum> {
    check_rate(ch, rate)?;
    require_noisy(ch)?;
    let lo = r0(ch, rate).clamp(0.0, 1.0);
    let m = maximize_f2(ch, rate, lo)?;
    Ok(VariationalOptimum {
        b_star: m.arg,
        exponent: -m.value,
    })
}

/// `-max_{b in [0,1]} f2(p, R, b)`: the same program without `b >= r0`.
pub fn classical_exponent(ch: &ChannelBsc, rate: f64) -> Result<f64> {
    check_rate(ch, rate)?;
    require_noisy(ch)?;
    Ok(-maximize_f2(ch, rate, 0.0)?.value)
}

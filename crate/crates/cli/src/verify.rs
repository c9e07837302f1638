//! The `verify` battery.
//!
//! Identity checks and oracle-vs-simulation checks are internal consistency:
//! any failure makes the command exit with status 1. Disagreements between
//! the printed formulas and the computed quantities are findings, recorded in
//! `open_flags`, and never affect the exit status.

use bsc_exponent::exponents::{
    b0, critical_rate, entropy_of_b0_closed_form, binary_entropy, classical_exponent, gallager_e0,
    new_critical_rate, printed_exponent, r0, restricted_variational_exponent, sphere_packing,
};
use bsc_exponent::oracle::{exact_error_probability, exponent_fit, Trend};
use bsc_exponent::simulator::{estimate_with_codebook_size, SimMode, SimRequest};
use bsc_exponent::statsum::{sample_statsum, sample_statsum_paired, statsum_mean_and_sd, theorem2_check, Theorem2Report};
use bsc_exponent::{ChannelBsc, RatePoint, SelectedBranch, TiePolicy};
use serde::{Deserialize, Serialize};

use crate::commands::z_of;
use crate::settings::{Defaults, Format, RateDefault, Settings};
use crate::CliError;

pub const VERIFY_DEFAULTS: Defaults = Defaults {
    p: 0.1,
    rates: RateDefault::List(&[0.05, 0.2, 0.3]),
    n_grid: "512..8192:geometric",
    trials: 10_000,
    samples: 10_000,
    format: Format::Json,
};

pub const IDENTITY_TOL: f64 = 1e-12;
/// Relative agreement for an oracle slope to count as matching a formula.
pub const SLOPE_MATCH: f64 = 0.05;
pub const MC_CELLS: [(u64, usize); 4] = [(2, 8), (8, 8), (2, 16), (8, 16)];
pub const STATSUM_RATE: f64 = 0.1;
pub const STATSUM_N: usize = 40;

/// `{0.01, 0.05, ..., 0.49}`
pub fn identity_p_grid() -> Vec<f64> {
    (0..13).map(|i| (1 + 4 * i) as f64 / 100.0).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub status: Status,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
}

impl IdentityCheck {
    fn new(name: impl Into<String>, measured: f64, expected: f64, tolerance: f64) -> Self {
        let ok = (measured - expected).abs() <= tolerance;
        IdentityCheck {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            measured,
            expected,
            tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub p: f64,
    pub rates: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub trials: u64,
    pub samples: u64,
    pub tie_policy: String,
    pub identity_p_grid: Vec<f64>,
    /// `(M, n)` pairs simulated in both modes.
    pub mc_cells: Vec<(u64, usize)>,
    pub statsum_rate: f64,
    pub statsum_n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOrder {
    pub r_crit: Option<f64>,
    pub r_cr: f64,
    /// Whether `R_crit < R_cr`, the ordering the printed ranges rely on.
    pub ordering_as_printed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchRow {
    pub rate: f64,
    pub delta_r: f64,
    pub r0: f64,
    pub branch1: Option<f64>,
    pub neg_branch1: Option<f64>,
    pub branch2: f64,
    pub branch3: f64,
    pub restricted_variational: Option<f64>,
    pub restricted_b_star: Option<f64>,
    pub classical: Option<f64>,
    pub selected: SelectedBranch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeTarget {
    pub name: String,
    pub value: f64,
    pub relative_difference: f64,
    pub matches: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSlope {
    pub p: f64,
    pub rate: f64,
    pub tie_policy: String,
    pub n_grid: Vec<usize>,
    pub ln_pe: Vec<f64>,
    pub slope: f64,
    pub log_correction: f64,
    pub intercept: f64,
    pub per_step_slopes: Vec<f64>,
    pub trend: Trend,
    pub targets: Vec<SlopeTarget>,
    /// Names of the targets within 5% of the fitted slope.
    pub matches: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstMoment {
    pub m: u64,
    pub n: usize,
    pub samples: u64,
    pub empirical_mean: f64,
    pub expected_mean: f64,
    /// Standard deviation of the sample mean, from the exact variance.
    pub sigma: f64,
    pub within_4_sigma: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsumFindings {
    pub z: f64,
    pub theorem2: Theorem2Report,
    /// Violation convention: deviation strictly above the threshold.
    pub violation_rule: String,
    pub first_moment: FirstMoment,
    /// Largest `|ln S - ln M|` over samples at `z = 1`.
    pub z_one_max_abs_error: f64,
    /// Largest deviation difference between `(z, w)` and `(1/z, n - w)`.
    pub paired_max_abs_difference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenFlag {
    pub id: String,
    pub summary: String,
    pub measured: Option<f64>,
    pub reference: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub bscx: String,
    pub bsc_exponent: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub inputs: Inputs,
    pub identity_checks: Vec<IdentityCheck>,
    pub threshold_order: ThresholdOrder,
    pub branch_table: Vec<BranchRow>,
    pub oracle_slopes: Vec<OracleSlope>,
    pub statsum_findings: Option<StatsumFindings>,
    pub open_flags: Vec<OpenFlag>,
    pub versions: Versions,
    pub seed: u64,
}

impl VerifyReport {
    pub fn failed_checks(&self) -> Vec<String> {
        self.identity_checks
            .iter()
            .filter(|c| c.status == Status::Fail)
            .map(|c| c.name.clone())
            .collect()
    }
}

fn closed_form_checks(checks: &mut Vec<IdentityCheck>, p: f64) -> Result<(), CliError> {
    if p > 0.0 {
        let ch = ChannelBsc::new(p)?;
        let rc = new_critical_rate(&ch).expect("p > 0");
        checks.push(IdentityCheck::new("r0_at_Rcrit_equals_b0", r0(&ch, rc), b0(&ch), IDENTITY_TOL));
        let ch_b0 = binary_entropy(b0(&ch))?;
        checks.push(IdentityCheck::new(
            "entropy_of_b0_closed_form",
            entropy_of_b0_closed_form(&ch),
            ch_b0,
            IDENTITY_TOL,
        ));
        let rcr = critical_rate(&ch);
        checks.push(IdentityCheck::new(
            "branch2_equals_Esp_at_Rcr",
            gallager_e0(&ch) - rcr,
            sphere_packing(&ch, rcr)?,
            IDENTITY_TOL,
        ));
    }

    let (mut r0_err, mut h_err, mut tangent_err) = (0.0f64, 0.0f64, 0.0f64);
    for q in identity_p_grid() {
        let ch = ChannelBsc::new(q)?;
        let rc = new_critical_rate(&ch).expect("p > 0");
        r0_err = r0_err.max((r0(&ch, rc) - b0(&ch)).abs());
        h_err = h_err.max((entropy_of_b0_closed_form(&ch) - binary_entropy(b0(&ch))?).abs());
        let rcr = critical_rate(&ch);
        tangent_err = tangent_err.max((gallager_e0(&ch) - rcr - sphere_packing(&ch, rcr)?).abs());
    }
    checks.push(IdentityCheck::new("r0_at_Rcrit_equals_b0_p_grid_max_error", r0_err, 0.0, IDENTITY_TOL));
    checks.push(IdentityCheck::new("entropy_of_b0_closed_form_p_grid_max_error", h_err, 0.0, IDENTITY_TOL));
    checks.push(IdentityCheck::new("branch2_equals_Esp_at_Rcr_p_grid_max_error", tangent_err, 0.0, IDENTITY_TOL));
    Ok(())
}

fn pinned_checks(checks: &mut Vec<IdentityCheck>) -> Result<(), CliError> {
    let pe = |n, m: f64, p, tie| -> Result<f64, CliError> {
        Ok(exact_error_probability(n, m.ln(), p, tie)?.log_pe.exp())
    };
    checks.push(IdentityCheck::new(
        "oracle_n1_M2_p0.1_ties_as_error",
        pe(1, 2.0, 0.1, TiePolicy::TiesAsError)?,
        0.55,
        IDENTITY_TOL,
    ));
    checks.push(IdentityCheck::new(
        "oracle_n1_M2_p0.1_random_tie_break",
        pe(1, 2.0, 0.1, TiePolicy::RandomTieBreak)?,
        0.3,
        IDENTITY_TOL,
    ));
    checks.push(IdentityCheck::new(
        "oracle_n2_M2_p0_ties_as_error",
        pe(2, 2.0, 0.0, TiePolicy::TiesAsError)?,
        0.25,
        IDENTITY_TOL,
    ));
    Ok(())
}

fn monte_carlo_checks(checks: &mut Vec<IdentityCheck>, s: &Settings) -> Result<(), CliError> {
    for &(m, n) in &MC_CELLS {
        let oracle = exact_error_probability(n, (m as f64).ln(), s.p, s.tie)?.log_pe.exp();
        let mut halves = Vec::new();
        let mut estimates = Vec::new();
        for mode in [SimMode::FullEnsemble, SimMode::DistanceSampled] {
            let t = estimate_with_codebook_size(SimRequest {
                p: s.p,
                n,
                m,
                trials: s.trials,
                mode,
                tie: s.tie,
                seed: s.seed,
            })?;
            // An estimate of 0 or 1 has a zero-width interval, so the
            // oracle's own binomial width is the floor.
            let floor = 1.96 * (oracle * (1.0 - oracle) / s.trials as f64).sqrt();
            let half = t.ci_half_width.max(floor);
            checks.push(IdentityCheck::new(
                format!("mc_vs_oracle_{}_M{m}_n{n}", mode.label()),
                t.estimate,
                oracle,
                4.0 * half,
            ));
            halves.push(half);
            estimates.push(t.estimate);
        }
        checks.push(IdentityCheck::new(
            format!("mc_full_vs_distance_M{m}_n{n}"),
            estimates[0],
            estimates[1],
            4.0 * (halves[0].powi(2) + halves[1].powi(2)).sqrt(),
        ));
    }
    Ok(())
}

fn branch_rows(ch: &ChannelBsc, rates: &[f64]) -> Result<Vec<BranchRow>, CliError> {
    rates
        .iter()
        .map(|&r| {
            let rp = RatePoint::new(ch, r)?;
            let br = printed_exponent(ch, r)?;
            let (restricted, classical) = if ch.p() > 0.0 {
                (Some(restricted_variational_exponent(ch, r)?), Some(classical_exponent(ch, r)?))
            } else {
                (None, None)
            };
            Ok(BranchRow {
                rate: r,
                delta_r: rp.delta_r,
                r0: rp.r0,
                branch1: br.branch1,
                neg_branch1: br.branch1.map(|b| -b),
                branch2: br.branch2,
                branch3: br.branch3,
                restricted_variational: restricted.map(|v| v.exponent),
                restricted_b_star: restricted.map(|v| v.b_star),
                classical,
                selected: br.selected,
            })
        })
        .collect()
}

fn targets_of(row: &BranchRow) -> Vec<(&'static str, f64)> {
    let mut t = Vec::new();
    if let Some(b) = row.branch1 {
        t.push(("branch1", b));
        t.push(("neg_branch1", -b));
    }
    t.push(("branch2", row.branch2));
    t.push(("branch3", row.branch3));
    if let Some(v) = row.restricted_variational {
        t.push(("restricted_variational", v));
    }
    if let Some(v) = row.classical {
        t.push(("classical", v));
    }
    t
}

pub fn relative_difference(measured: f64, target: f64) -> f64 {
    if target == 0.0 {
        measured.abs()
    } else {
        ((measured - target) / target).abs()
    }
}

fn oracle_slopes(s: &Settings, table: &[BranchRow]) -> Result<Vec<OracleSlope>, CliError> {
    if s.n_grid.len() < 3 {
        return Ok(Vec::new());
    }
    table
        .iter()
        .map(|row| {
            let fit = exponent_fit(s.p, row.rate, &s.n_grid, s.tie)?;
            let targets: Vec<SlopeTarget> = targets_of(row)
                .into_iter()
                .map(|(name, value)| {
                    let rel = relative_difference(fit.fit.slope, value);
                    SlopeTarget {
                        name: name.to_string(),
                        value,
                        relative_difference: rel,
                        matches: rel <= SLOPE_MATCH,
                    }
                })
                .collect();
            Ok(OracleSlope {
                p: s.p,
                rate: row.rate,
                tie_policy: s.tie.label().to_string(),
                n_grid: s.n_grid.clone(),
                ln_pe: fit.points.iter().map(|pt| pt.ln_pe).collect(),
                slope: fit.fit.slope,
                log_correction: fit.fit.log_correction,
                intercept: fit.fit.intercept,
                per_step_slopes: fit.fit.per_step_slopes,
                trend: fit.fit.trend,
                matches: targets.iter().filter(|t| t.matches).map(|t| t.name.clone()).collect(),
                targets,
            })
        })
        .collect()
}

fn statsum_findings(s: &Settings) -> Result<Option<StatsumFindings>, CliError> {
    if s.p == 0.0 {
        return Ok(None);
    }
    let z = z_of(s.p);
    let theorem2 = theorem2_check(z, STATSUM_RATE, STATSUM_N, s.samples, s.seed)?;
    let m = theorem2.m;

    let draws = sample_statsum(z, m, STATSUM_N, s.samples, s.seed)?;
    let empirical_mean = draws.iter().map(|d| d.ln_s.exp()).sum::<f64>() / s.samples as f64;
    let (expected_mean, sd) = statsum_mean_and_sd(z, m, STATSUM_N);
    let sigma = sd / (s.samples as f64).sqrt();

    let ln_m = (m as f64).ln();
    let z_one_max_abs_error = sample_statsum(1.0, m, STATSUM_N, s.samples, s.seed)?
        .iter()
        .map(|d| (d.ln_s - ln_m).abs())
        .fold(0.0, f64::max);

    let (a, b) = sample_statsum_paired(z, m, STATSUM_N, s.samples, s.seed)?;
    let paired_max_abs_difference = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x.deviation - y.deviation).abs())
        .fold(0.0, f64::max);

    Ok(Some(StatsumFindings {
        z,
        theorem2,
        violation_rule: "deviation > threshold".into(),
        first_moment: FirstMoment {
            m,
            n: STATSUM_N,
            samples: s.samples,
            empirical_mean,
            expected_mean,
            sigma,
            within_4_sigma: (empirical_mean - expected_mean).abs() <= 4.0 * sigma,
        },
        z_one_max_abs_error,
        paired_max_abs_difference,
    }))
}

fn selected_value(row: &BranchRow) -> Option<(&'static str, f64)> {
    match row.selected {
        SelectedBranch::Branch1 => row.branch1.map(|b| ("branch1", b)),
        SelectedBranch::Branch2 => Some(("branch2", row.branch2)),
        SelectedBranch::Branch3 => Some(("branch3", row.branch3)),
        SelectedBranch::InconsistentThresholds => None,
    }
}

fn open_flags(
    order: &ThresholdOrder,
    table: &[BranchRow],
    slopes: &[OracleSlope],
    statsum: Option<&StatsumFindings>,
) -> Vec<OpenFlag> {
    let mut flags = Vec::new();
    if let (Some(rc), false) = (order.r_crit, order.ordering_as_printed) {
        flags.push(OpenFlag {
            id: "threshold-ordering".into(),
            summary: format!(
                "printed ordering R_crit < R_cr fails: R_crit = {rc:.5} exceeds R_cr = {:.5}, so the three rate ranges do not partition [0, C]",
                order.r_cr
            ),
            measured: Some(rc),
            reference: Some(order.r_cr),
        });
    }
    for row in table {
        if row.r0 > row.delta_r {
            flags.push(OpenFlag {
                id: format!("r0-above-delta-R@{}", row.rate),
                summary: format!(
                    "r0 = {:.5} exceeds delta_R = {:.5} at R = {}, so the premise r0 <= delta_R of the restricted maximization fails",
                    row.r0, row.delta_r, row.rate
                ),
                measured: Some(row.r0),
                reference: Some(row.delta_r),
            });
        }
        if let Some(b) = row.branch1.filter(|b| *b < 0.0) {
            flags.push(OpenFlag {
                id: format!("branch1-negative@{}", row.rate),
                summary: format!("printed branch1 is negative ({b:.5}) at R = {}, which no exponent can be", row.rate),
                measured: Some(b),
                reference: Some(0.0),
            });
        }
    }
    for (slope, row) in slopes.iter().zip(table) {
        match selected_value(row) {
            Some((name, value)) if relative_difference(slope.slope, value) > SLOPE_MATCH => {
                flags.push(OpenFlag {
                    id: format!("oracle-slope-vs-printed@{}", row.rate),
                    summary: format!(
                        "oracle slope {:.5} at R = {} is not within 5% of the printed {name} = {value:.5}; matches: [{}]",
                        slope.slope,
                        row.rate,
                        slope.matches.join(", ")
                    ),
                    measured: Some(slope.slope),
                    reference: Some(value),
                });
            }
            None => flags.push(OpenFlag {
                id: format!("oracle-slope-vs-printed@{}", row.rate),
                summary: format!(
                    "no printed branch is selected at R = {} because the thresholds are inconsistent; oracle slope {:.5} matches: [{}]",
                    row.rate,
                    slope.slope,
                    slope.matches.join(", ")
                ),
                measured: Some(slope.slope),
                reference: None,
            }),
            _ => {}
        }
    }
    if let Some(f) = statsum {
        let t = &f.theorem2;
        if t.violation_frequency > t.ln_bound.exp() {
            flags.push(OpenFlag {
                id: "concentration-bound".into(),
                summary: format!(
                    "measured violation frequency {} at z = {:.5}, n = {}, M = {} exceeds the claimed bound exp({:.3}) (ln scale)",
                    t.violation_frequency, t.z, t.n, t.m, t.ln_bound
                ),
                measured: Some(t.violation_frequency),
                reference: Some(t.ln_bound),
            });
        }
    }
    flags
}

pub fn run_verify(s: &Settings) -> Result<VerifyReport, CliError> {
    let ch = ChannelBsc::new(s.p)?;

    let mut checks = Vec::new();
    closed_form_checks(&mut checks, s.p)?;
    pinned_checks(&mut checks)?;
    monte_carlo_checks(&mut checks, s)?;

    let r_crit = new_critical_rate(&ch);
    let r_cr = critical_rate(&ch);
    let threshold_order = ThresholdOrder {
        r_crit,
        r_cr,
        ordering_as_printed: r_crit.is_some_and(|rc| rc < r_cr),
    };

    let branch_table = branch_rows(&ch, &s.rates)?;
    let slopes = if s.p > 0.0 { oracle_slopes(s, &branch_table)? } else { Vec::new() };
    let statsum = statsum_findings(s)?;
    let flags = open_flags(&threshold_order, &branch_table, &slopes, statsum.as_ref());

    Ok(VerifyReport {
        inputs: Inputs {
            p: s.p,
            rates: s.rates.clone(),
            n_grid: s.n_grid.clone(),
            trials: s.trials,
            samples: s.samples,
            tie_policy: s.tie.label().to_string(),
            identity_p_grid: identity_p_grid(),
            mc_cells: MC_CELLS.to_vec(),
            statsum_rate: STATSUM_RATE,
            statsum_n: STATSUM_N,
        },
        identity_checks: checks,
        threshold_order,
        branch_table,
        oracle_slopes: slopes,
        statsum_findings: statsum,
        open_flags: flags,
        versions: Versions {
            bscx: env!("CARGO_PKG_VERSION").to_string(),
            bsc_exponent: bsc_exponent::VERSION.to_string(),
        },
        seed: s.seed,
    })
}

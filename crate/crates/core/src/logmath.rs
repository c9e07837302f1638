//! Extended-log-domain arithmetic.
//!
//! Zero is `-inf`. Every helper here accepts `-inf` and `+inf` where the
//! underlying function has a limit, and none of them may return NaN for
//! inputs in their documented domain.

use std::f64::consts::LN_2;
use std::ops::{Div, Mul};

use crate::error::{Error, Result};

/// Natural logarithm of a nonnegative real. `-inf` encodes zero.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LogReal(f64);

impl LogReal {
    pub const ZERO: LogReal = LogReal(f64::NEG_INFINITY);
    pub const ONE: LogReal = LogReal(0.0);

    pub fn new(ln_value: f64) -> Result<Self> {
        if ln_value.is_nan() {
            return Err(Error::NaN);
        }
        Ok(LogReal(ln_value))
    }

    pub fn from_linear(x: f64) -> Result<Self> {
        if x.is_nan() || x < 0.0 {
            return Err(Error::OutOfRange {
                what: "linear value",
                value: x,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        Ok(LogReal(x.ln()))
    }

    #[inline]
    pub fn ln(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn exp(self) -> f64 {
        self.0.exp()
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// `ln(1 - x)` for `x = self <= 1`.
    pub fn complement(self) -> Result<Self> {
        if self.0 > 0.0 {
            return Err(Error::OutOfRange {
                what: "probability",
                value: self.exp(),
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(LogReal(log1mexp(self.0)))
    }
}

impl Mul for LogReal {
    type Output = LogReal;
    fn mul(self, rhs: LogReal) -> LogReal {
        // 0 * inf has no meaning for probabilities; treat zero as absorbing.
        if self.is_zero() || rhs.is_zero() {
            return LogReal::ZERO;
        }
        LogReal(self.0 + rhs.0)
    }
}

impl Div for LogReal {
    type Output = LogReal;
    fn div(self, rhs: LogReal) -> LogReal {
        if self.is_zero() {
            return LogReal::ZERO;
        }
        LogReal(self.0 - rhs.0)
    }
}

/// `ln(e^a + e^b)`.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY || lo == f64::NEG_INFINITY {
        return hi;
    }
    if hi == f64::INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Σ e^{v_i}` over raw log values; the empty sum is `-inf`.
pub fn log_sum_exp_f64<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64>,
    I::IntoIter: Clone,
{
    let iter = values.into_iter();
    let max = iter.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = iter.map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

pub fn log_sum_exp(values: &[LogReal]) -> LogReal {
    LogReal(log_sum_exp_f64(values.iter().map(|v| v.0)))
}

/// `ln(1 - e^v)` for `v <= 0`.
///
/// Switches between `ln(-expm1(v))` and `ln_1p(-e^v)` at `v = -ln 2`.
#[inline]
pub fn log1mexp(v: f64) -> f64 {
    debug_assert!(!(v > 0.0), "log1mexp domain: v = {v}");
    if v > -LN_2 {
        (-v.exp_m1()).ln()
    } else {
        (-v.exp()).ln_1p()
    }
}

/// `ln(-ln(1 - e^v))` for `v <= 0`; this is the log of the exponent rate
/// `-ln(1 - x)` for a probability `x = e^v`, accurate when `x` underflows.
#[inline]
pub fn log_neg_log1mexp(v: f64) -> f64 {
    if v == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if v < -20.0 {
        // -ln(1-x) = x (1 + x/2 + x^2/3 + ...)
        let x = v.exp();
        return v + x / 2.0 + 5.0 * x * x / 24.0;
    }
    (-log1mexp(v)).ln()
}

/// `ln(1 - e^{-w})` given `lw = ln w`, `w >= 0`.
#[inline]
pub fn log1mexp_neg_exp(lw: f64) -> f64 {
    if lw == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if lw < -20.0 {
        let w = lw.exp();
        return lw - w / 2.0 + w * w / 24.0;
    }
    let w = lw.exp();
    (-(-w).exp_m1()).ln()
}

/// Running sum with Neumaier compensation.
#[derive(Clone, Copy, Debug, Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Row `n` of Pascal's triangle in logs, plus the CDF and survival function
/// of `Bin(n, 1/2)`.
#[derive(Clone, Debug)]
pub struct BinomialTable {
    n: usize,
    log_choose: Vec<f64>,
    /// ln P{Bin(n,1/2) <= d}
    log_cdf: Vec<f64>,
    /// ln P{Bin(n,1/2) > d}
    log_sf: Vec<f64>,
}

impl BinomialTable {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("binomial table needs n >= 1".into()));
        }
        let mut log_choose = vec![0.0; n + 1];
        let mut acc = CompensatedSum::default();
        for k in 1..=n / 2 {
            acc.add(((n - k + 1) as f64).ln());
            acc.add(-(k as f64).ln());
            log_choose[k] = acc.value();
        }
        for k in n / 2 + 1..=n {
            log_choose[k] = log_choose[n - k];
        }

        let log_total = n as f64 * LN_2;
        let mut log_cdf = vec![0.0; n + 1];
        let mut log_sf = vec![f64::NEG_INFINITY; n + 1];

        // Lower half first, where the tail is the small side.
        let mut running = f64::NEG_INFINITY;
        let mut d = 0;
        while 2 * d < n {
            running = log_add(running, log_choose[d] - log_total);
            log_cdf[d] = running;
            d += 1;
        }
        // P{X > d} = P{X < n - d} = F(n - d - 1) by symmetry.
        for d in 0..n {
            let mirror = n - d - 1;
            if 2 * mirror < n {
                log_sf[d] = log_cdf[mirror];
            }
        }
        for d in 0..=n {
            if 2 * d >= n {
                log_cdf[d] = log1mexp(log_sf[d]);
            }
        }
        for d in 0..n {
            if 2 * (n - d - 1) >= n {
                log_sf[d] = log1mexp(log_cdf[d]);
            }
        }

        Ok(BinomialTable {
            n,
            log_choose,
            log_cdf,
            log_sf,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn log_choose(&self) -> &[f64] {
        &self.log_choose
    }

    fn check(&self, d: usize) -> Result<()> {
        if d > self.n {
            return Err(Error::OutOfRange {
                what: "d",
                value: d as f64,
                lo: 0.0,
                hi: self.n as f64,
            });
        }
        Ok(())
    }

    /// ln P{Bin(n,1/2) = d}
    pub fn log_pmf_half(&self, d: usize) -> Result<LogReal> {
        self.check(d)?;
        Ok(LogReal(self.log_choose[d] - self.n as f64 * LN_2))
    }

    /// ln P{Bin(n,1/2) <= d}
    pub fn log_cdf(&self, d: usize) -> Result<LogReal> {
        self.check(d)?;
        Ok(LogReal(self.log_cdf[d]))
    }

    /// ln P{Bin(n,1/2) > d}
    pub fn log_sf(&self, d: usize) -> Result<LogReal> {
        self.check(d)?;
        Ok(LogReal(self.log_sf[d]))
    }

    /// ln[C(n,k) p^k q^(n-k)] using this table's coefficients.
    pub fn log_pmf(&self, k: usize, log_p: LogReal, log_q: LogReal) -> Result<LogReal> {
        self.check(k)?;
        check_normalized(log_p, log_q)?;
        Ok(LogReal(
            self.log_choose[k] + times_log(k, log_p.0) + times_log(self.n - k, log_q.0),
        ))
    }
}

/// `k * ln x` with the convention `0 * ln 0 = 0`.
#[inline]
pub(crate) fn times_log(k: usize, ln_x: f64) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * ln_x
    }
}

fn check_normalized(log_p: LogReal, log_q: LogReal) -> Result<()> {
    let total = log_p.exp() + log_q.exp();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized(total));
    }
    Ok(())
}

/// ln F(d) with F the CDF of `Bin(n, 1/2)`.
pub fn log_binomial_cdf(table: &BinomialTable, d: usize) -> Result<LogReal> {
    table.log_cdf(d)
}

/// ln[C(n,k) p^k q^(n-k)] without a precomputed table.
pub fn log_binomial_pmf(n: usize, k: usize, log_p: LogReal, log_q: LogReal) -> Result<LogReal> {
    if k > n {
        return Err(Error::OutOfRange {
            what: "k",
            value: k as f64,
            lo: 0.0,
            hi: n as f64,
        });
    }
    check_normalized(log_p, log_q)?;
    let j = k.min(n - k);
    let mut acc = CompensatedSum::default();
    for i in 1..=j {
        acc.add(((n - i + 1) as f64).ln());
        acc.add(-(i as f64).ln());
    }
    Ok(LogReal(
        acc.value() + times_log(k, log_p.0) + times_log(n - k, log_q.0),
    ))
}

/// Bisection for `f(x) = target` with `f` monotone on `[lo, hi]`.
///
/// Stops once the bracket is no wider than `tol` (or cannot shrink further in
/// floating point) and returns its midpoint.
pub fn bisect_monotone<F>(f: F, lo: f64, hi: f64, target: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(tol > 0.0) || !(lo <= hi) {
        return Err(Error::Invalid(format!(
            "bisection needs lo <= hi and tol > 0 (lo={lo}, hi={hi}, tol={tol})"
        )));
    }
    let f_lo = f(lo);
    let f_hi = f(hi);
    if !f_lo.is_finite() {
        return Err(Error::NonFinite(lo));
    }
    if !f_hi.is_finite() {
        return Err(Error::NonFinite(hi));
    }
    let (min, max) = if f_lo <= f_hi { (f_lo, f_hi) } else { (f_hi, f_lo) };
    if !(target >= min && target <= max) {
        return Err(Error::NotBracketed { target, f_lo, f_hi });
    }
    let increasing = f_lo <= f_hi;
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if !fm.is_finite() {
            return Err(Error::NonFinite(mid));
        }
        if (fm < target) == increasing {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lr(x: f64) -> LogReal {
        LogReal::new(x).unwrap()
    }

    fn entropy(x: f64) -> f64 {
        crate::exponents::binary_entropy(x).unwrap()
    }

    #[test]
    fn nan_rejected() {
        assert_eq!(LogReal::new(f64::NAN), Err(Error::NaN));
        assert!(LogReal::from_linear(-1.0).is_err());
    }

    #[test]
    fn log_sum_exp_examples() {
        let two = log_sum_exp(&[lr(0.0), lr(0.0)]);
        assert!((two.ln() - LN_2).abs() < 1e-15);
        assert!(log_sum_exp(&[LogReal::ZERO]).is_zero());
        assert!(log_sum_exp(&[]).is_zero());
        let four = log_sum_exp(&[lr(0.0), lr(3f64.ln())]);
        assert!((four.ln() - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log1mexp_branches_agree_at_switch() {
        let v = -LN_2;
        let a = (-v.exp_m1()).ln();
        let b = (-v.exp()).ln_1p();
        assert!((a - b).abs() < 1e-15);
        assert_eq!(log1mexp(0.0), f64::NEG_INFINITY);
        assert_eq!(log1mexp(f64::NEG_INFINITY), 0.0);
        assert!((log1mexp(-1e-20) - (1e-20f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn log_neg_log1mexp_series_matches_direct() {
        for &v in &[-19.9f64, -20.1, -5.0, -1.0, -0.1] {
            let direct = (-(-v.exp()).ln_1p()).ln();
            assert!((log_neg_log1mexp(v) - direct).abs() < 1e-13, "v = {v}");
        }
        assert_eq!(log_neg_log1mexp(-3000.0), -3000.0);
        assert_eq!(log_neg_log1mexp(0.0), f64::INFINITY);
    }

    #[test]
    fn log1mexp_neg_exp_limits() {
        assert_eq!(log1mexp_neg_exp(f64::INFINITY), 0.0);
        assert_eq!(log1mexp_neg_exp(f64::NEG_INFINITY), f64::NEG_INFINITY);
        let direct = (-(-(-19.0f64).exp()).exp_m1()).ln();
        assert!((log1mexp_neg_exp(-19.0) - direct).abs() < 1e-14);
        let lw = -21.0f64;
        assert!((log1mexp_neg_exp(lw) - (lw - lw.exp() / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn cdf_examples() {
        let t1 = BinomialTable::new(1).unwrap();
        assert!((log_binomial_cdf(&t1, 0).unwrap().ln() - 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(log_binomial_cdf(&t1, 1).unwrap().ln(), 0.0);

        let t4 = BinomialTable::new(4).unwrap();
        let f = log_binomial_cdf(&t4, 1).unwrap().ln();
        assert!((f - (5.0f64 / 16.0).ln()).abs() < 1e-15);
        assert!(log_binomial_cdf(&t4, 5).is_err());

        for n in [7usize, 64, 1000] {
            let t = BinomialTable::new(n).unwrap();
            assert_eq!(t.log_cdf(n).unwrap().ln(), 0.0);
            assert!(t.log_sf(n).unwrap().is_zero());
        }
    }

    #[test]
    fn table_symmetry_is_exact() {
        for n in [1usize, 2, 9, 10, 513, 4096] {
            let t = BinomialTable::new(n).unwrap();
            let row = t.log_choose();
            for k in 0..=n {
                assert_eq!(row[k], row[n - k]);
            }
        }
    }

    #[test]
    fn table_row_sums_to_two_to_the_n() {
        for shift in [1u32, 4, 10, 16, 20] {
            let n = 1usize << shift;
            let t = BinomialTable::new(n).unwrap();
            let total = log_sum_exp_f64(t.log_choose().iter().copied());
            let err = (total - n as f64 * LN_2).abs();
            assert!(err <= 1e-10, "n = {n}: |row - n ln2| = {err:e}");
        }
    }

    #[test]
    fn cdf_matches_exact_rational_sums() {
        // Exact integer partial sums of C(n, i), n <= 20.
        for n in 1..=20usize {
            let t = BinomialTable::new(n).unwrap();
            let mut row = vec![1u64; n + 1];
            for k in 1..=n {
                row[k] = row[k - 1] * (n - k + 1) as u64 / k as u64;
            }
            let mut partial = 0u64;
            for d in 0..=n {
                partial += row[d];
                let exact = (partial as f64 / (1u64 << n) as f64).ln();
                let got = t.log_cdf(d).unwrap().ln();
                assert!((got - exact).abs() <= 1e-12, "n={n} d={d}");
                if d < n {
                    let exact_sf = (((1u64 << n) - partial) as f64 / (1u64 << n) as f64).ln();
                    assert!((t.log_sf(d).unwrap().ln() - exact_sf).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn cdf_tail_asymptotics() {
        for shift in [10u32, 12, 14] {
            let n = 1usize << shift;
            let t = BinomialTable::new(n).unwrap();
            let slack = 2.0 * ((n + 1) as f64).ln() / n as f64;
            for &b in &[0.1, 0.25, 0.4] {
                let d = (b * n as f64).floor() as usize;
                let per_symbol = t.log_cdf(d).unwrap().ln() / n as f64;
                let limit = entropy(b) - LN_2;
                assert!((per_symbol - limit).abs() <= slack, "n={n} b={b}");
            }
        }
    }

    #[test]
    fn pmf_examples() {
        let half = lr(0.5f64.ln());
        let v = log_binomial_pmf(2, 1, half, half).unwrap();
        assert!((v.ln() - 0.5f64.ln()).abs() < 1e-15);

        let p = lr(0.1f64.ln());
        let q = lr(0.9f64.ln());
        assert!((log_binomial_pmf(1, 1, p, q).unwrap().ln() - 0.1f64.ln()).abs() < 1e-15);
        assert!((log_binomial_pmf(3, 2, p, q).unwrap().ln() - 0.027f64.ln()).abs() < 1e-14);

        assert!(log_binomial_pmf(3, 4, p, q).is_err());
        assert!(matches!(
            log_binomial_pmf(3, 1, p, p),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn pmf_sums_to_one_and_handles_p_zero() {
        let p = lr(0.3f64.ln());
        let q = lr(0.7f64.ln());
        let t = BinomialTable::new(200).unwrap();
        let terms: Vec<LogReal> = (0..=200).map(|k| t.log_pmf(k, p, q).unwrap()).collect();
        assert!(log_sum_exp(&terms).ln().abs() < 1e-10);

        let zero = LogReal::ZERO;
        assert_eq!(log_binomial_pmf(5, 0, zero, LogReal::ONE).unwrap().ln(), 0.0);
        assert!(log_binomial_pmf(5, 1, zero, LogReal::ONE).unwrap().is_zero());
    }

    #[test]
    fn bisection_examples() {
        let x = bisect_monotone(|x| x, 0.0, 1.0, 0.5, 1e-12).unwrap();
        assert!((x - 0.5).abs() < 1e-12);

        // h is flat at its peak, so the root is only located to sqrt(eps).
        let peak = bisect_monotone(entropy, 0.0, 0.5, LN_2, 1e-12).unwrap();
        assert!((peak - 0.5).abs() < 1e-7);

        // Reference: mpmath findroot at 30 digits.
        let x = bisect_monotone(entropy, 0.0, 0.5, LN_2 - 0.3, 1e-15).unwrap();
        assert!((x - 0.133_586_025_353_257_9).abs() < 1e-14);

        assert!(matches!(
            bisect_monotone(|x| x, 0.0, 1.0, 2.0, 1e-9),
            Err(Error::NotBracketed { .. })
        ));
        assert!(matches!(
            bisect_monotone(|x| 1.0 / x, 0.0, 1.0, 2.0, 1e-9),
            Err(Error::NonFinite(_))
        ));
    }
}

//! Monte Carlo over the random-coding ensemble.
//!
//! Two estimators of the same message-averaged error probability:
//!
//! - full ensemble: draw a bit-packed codebook, send message 0 through the
//!   BSC, and decode by minimum Hamming distance;
//! - distance sampled: draw `d_m ~ Bin(n, p)` and the histogram of the
//!   `M - 1` competitor distances (multinomial over `Bin(n, 1/2)` cells) by
//!   sequential conditional binomials, which reaches large `M` and `n`.
//!
//! Each trial draws from streams keyed by its own index, so summaries are
//! identical for any number of worker threads.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::logmath::{log_add, log_sum_exp_f64, BinomialTable};
use crate::oracle::{log_m_for_rate, TiePolicy};
use crate::rng::{derive_seed, stream, Purpose};

/// Default cap on the bits held by one [`PackedCode`]: 2 GiB.
pub const DEFAULT_MEMORY_CAP_BYTES: u64 = 2 << 30;

const Z_95: f64 = 1.96;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMode {
    FullEnsemble,
    #[default]
    DistanceSampled,
}

impl SimMode {
    pub fn label(self) -> &'static str {
        match self {
            SimMode::FullEnsemble => "full",
            SimMode::DistanceSampled => "distance",
        }
    }
}

impl std::str::FromStr for SimMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" | "full-ensemble" => Ok(SimMode::FullEnsemble),
            "distance" | "distance-sampled" => Ok(SimMode::DistanceSampled),
            other => Err(Error::Invalid(format!("unknown simulation mode '{other}'"))),
        }
    }
}

/// `M` codewords of `n` bits, one row of `⌈n/64⌉` limbs each.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedCode {
    n: usize,
    m: usize,
    limbs: usize,
    words: Vec<u64>,
    seed: u64,
}

fn limbs_for(n: usize) -> usize {
    n.div_ceil(64)
}

fn tail_mask(n: usize) -> u64 {
    match n % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

impl PackedCode {
    /// Wrap explicit rows, e.g. a hand-built code for tests.
    pub fn from_words(n: usize, m: usize, words: Vec<u64>) -> Result<Self> {
        let limbs = limbs_for(n);
        if n == 0 || m == 0 || words.len() != limbs * m {
            return Err(Error::Invalid(format!(
                "expected {m} rows of {limbs} limbs for n = {n}, got {} limbs",
                words.len()
            )));
        }
        let mask = tail_mask(n);
        if words.chunks(limbs).any(|row| row[limbs - 1] & !mask != 0) {
            return Err(Error::Invalid("bits set beyond position n".into()));
        }
        Ok(PackedCode {
            n,
            m,
            limbs,
            words,
            seed: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.words[i * self.limbs..(i + 1) * self.limbs]
    }

    pub fn weight(&self, i: usize) -> u32 {
        self.row(i).iter().map(|w| w.count_ones()).sum()
    }

    pub fn distance(&self, i: usize, y: &[u64]) -> u32 {
        hamming(self.row(i), y)
    }
}

pub fn hamming(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// Random code with iid fair bits; row `i` comes from stream `(seed, i)`.
pub fn generate_code(n: usize, m: usize, seed: u64) -> Result<PackedCode> {
    generate_code_capped(n, m, seed, DEFAULT_MEMORY_CAP_BYTES)
}

pub fn generate_code_capped(n: usize, m: usize, seed: u64, cap_bytes: u64) -> Result<PackedCode> {
    if n == 0 || m == 0 {
        return Err(Error::Invalid("code needs n >= 1 and M >= 1".into()));
    }
    let limbs = limbs_for(n);
    let bytes = (limbs as u128) * (m as u128) * 8;
    if bytes > cap_bytes as u128 {
        return Err(Error::Cap {
            requested: bytes,
            cap: cap_bytes as u128,
        });
    }
    let mask = tail_mask(n);
    let mut words = vec![0u64; limbs * m];
    for (i, row) in words.chunks_mut(limbs).enumerate() {
        let mut rng = stream(seed, Purpose::Code, i as u64);
        for w in row.iter_mut() {
            *w = rng.random();
        }
        row[limbs - 1] &= mask;
    }
    Ok(PackedCode {
        n,
        m,
        limbs,
        words,
        seed,
    })
}

/// Flip each of the `n` bits of `x` independently with probability `p`.
pub fn bsc_transmit(x: &[u64], n: usize, p: f64, noise_seed: u64) -> Result<Vec<u64>> {
    check_range("p", p, 0.0, 1.0)?;
    if x.len() != limbs_for(n) {
        return Err(Error::Invalid("word length does not match n".into()));
    }
    let mut y = x.to_vec();
    if p == 0.0 {
        return Ok(y);
    }
    let mut rng = stream(noise_seed, Purpose::Noise, 0);
    for bit in 0..n {
        if rng.random_bool(p) {
            y[bit / 64] ^= 1u64 << (bit % 64);
        }
    }
    Ok(y)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decision {
    /// Decoded index, or `None` when the decoder declares an error.
    pub index: Option<usize>,
    pub min_distance: u32,
    pub minimizers: usize,
}

/// Minimum-distance decoding.
///
/// With [`TiePolicy::TiesAsError`] and `truth = Some(m)`, any other codeword
/// at distance `<= d_m` is an error; without `truth`, a tie at the minimum is
/// an error. With [`TiePolicy::RandomTieBreak`] one minimizer is drawn
/// uniformly from the coin stream.
pub fn ml_decode(code: &PackedCode, y: &[u64], tie: TiePolicy, truth: Option<usize>, coin_seed: u64) -> Decision {
    let mut min = u32::MAX;
    let mut minimizers: Vec<usize> = Vec::new();
    for i in 0..code.m() {
        let d = code.distance(i, y);
        if d < min {
            min = d;
            minimizers.clear();
        }
        if d == min {
            minimizers.push(i);
        }
    }
    let index = match tie {
        TiePolicy::TiesAsError => match truth {
            Some(m) => {
                let dm = code.distance(m, y);
                let beaten = (0..code.m()).any(|i| i != m && code.distance(i, y) <= dm);
                if beaten {
                    None
                } else {
                    Some(m)
                }
            }
            None if minimizers.len() == 1 => Some(minimizers[0]),
            None => None,
        },
        TiePolicy::RandomTieBreak => {
            let pick = if minimizers.len() == 1 {
                0
            } else {
                stream(coin_seed, Purpose::Coin, 0).random_range(0..minimizers.len())
            };
            Some(minimizers[pick])
        }
    };
    Decision {
        index,
        min_distance: min,
        minimizers: minimizers.len(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub p: f64,
    pub n: usize,
    pub m: u64,
    pub mode: SimMode,
    pub tie: TiePolicy,
    pub trials: u64,
    pub errors: u64,
    pub estimate: f64,
    /// 95% normal-approximation half-width.
    pub ci_half_width: f64,
    pub seed: u64,
}

impl TrialSummary {
    fn new(p: f64, n: usize, m: u64, mode: SimMode, tie: TiePolicy, trials: u64, errors: u64, seed: u64) -> Self {
        let estimate = errors as f64 / trials as f64;
        TrialSummary {
            p,
            n,
            m,
            mode,
            tie,
            trials,
            errors,
            estimate,
            ci_half_width: Z_95 * (estimate * (1.0 - estimate) / trials as f64).sqrt(),
            seed,
        }
    }
}

/// Sum of `f(i)` over `0..count`, in parallel when enabled.
fn count_over<F>(count: u64, f: F) -> u64
where
    F: Fn(u64) -> u64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).sum()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).sum()
    }
}

fn map_over<T, F>(count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
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

/// Integer `M = round(e^{Rn})`, at least 2.
pub fn codebook_size(rate: f64, n: usize) -> Result<u64> {
    let log_m = log_m_for_rate(rate, n);
    if log_m >= 63.0 * std::f64::consts::LN_2 {
        return Err(Error::Cap {
            requested: u128::MAX,
            cap: 1u128 << 63,
        });
    }
    Ok(log_m.exp().round() as u64)
}

/// Conditional binomials `P{X = d | X >= d}` for `X ~ Bin(n, 1/2)`.
struct CompetitorLaw {
    n: usize,
    hazard: Vec<f64>,
}

impl CompetitorLaw {
    fn new(n: usize) -> Result<Self> {
        let table = BinomialTable::new(n)?;
        let hazard = (0..=n)
            .map(|d| {
                let log_u = if d == 0 { 0.0 } else { table.log_sf(d - 1).unwrap().ln() };
                let log_t = table.log_pmf_half(d).unwrap().ln();
                (log_t - log_u).exp().clamp(0.0, 1.0)
            })
            .collect();
        Ok(CompetitorLaw { n, hazard })
    }

    /// Histogram of `count` iid draws over distances `0..=up_to`; whatever
    /// remains lies above `up_to`.
    fn histogram<R: Rng>(&self, count: u64, up_to: usize, rng: &mut R) -> Vec<u64> {
        let mut remaining = count;
        let mut hist = vec![0u64; up_to.min(self.n) + 1];
        for (d, slot) in hist.iter_mut().enumerate() {
            if remaining == 0 {
                break;
            }
            let c = if self.hazard[d] >= 1.0 {
                remaining
            } else {
                Binomial::new(remaining, self.hazard[d])
                    .expect("hazard clamped to [0, 1]")
                    .sample(rng)
            };
            *slot = c;
            remaining -= c;
        }
        hist
    }
}

fn sample_true_distance<R: Rng>(n: usize, p: f64, rng: &mut R) -> usize {
    if p == 0.0 {
        return 0;
    }
    Binomial::new(n as u64, p).expect("p validated").sample(rng) as usize
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimRequest {
    pub p: f64,
    pub n: usize,
    pub m: u64,
    pub trials: u64,
    pub mode: SimMode,
    pub tie: TiePolicy,
    pub seed: u64,
}

/// Message-averaged error probability at rate `R` (`M = round(e^{Rn})`).
pub fn estimate_error_probability(
    p: f64,
    rate: f64,
    n: usize,
    trials: u64,
    mode: SimMode,
    tie: TiePolicy,
    seed: u64,
) -> Result<TrialSummary> {
    let m = codebook_size(rate, n)?;
    estimate_with_codebook_size(SimRequest {
        p,
        n,
        m,
        trials,
        mode,
        tie,
        seed,
    })
}

/// Message-averaged error probability for an explicit codebook size.
pub fn estimate_with_codebook_size(req: SimRequest) -> Result<TrialSummary> {
    check_range("p", req.p, 0.0, 0.5)?;
    if req.trials == 0 || req.n == 0 || req.m == 0 {
        return Err(Error::Invalid("need trials, n and M all >= 1".into()));
    }
    let errors = match req.mode {
        SimMode::FullEnsemble => {
            let limbs = limbs_for(req.n) as u128;
            let bytes = limbs * req.m as u128 * 8;
            if bytes > DEFAULT_MEMORY_CAP_BYTES as u128 {
                return Err(Error::Cap {
                    requested: bytes,
                    cap: DEFAULT_MEMORY_CAP_BYTES as u128,
                });
            }
            count_over(req.trials, |i| full_ensemble_trial(&req, i) as u64)
        }
        SimMode::DistanceSampled => {
            let law = CompetitorLaw::new(req.n)?;
            count_over(req.trials, |i| distance_sampled_trial(&req, &law, i) as u64)
        }
    };
    Ok(TrialSummary::new(req.p, req.n, req.m, req.mode, req.tie, req.trials, errors, req.seed))
}

fn full_ensemble_trial(req: &SimRequest, i: u64) -> bool {
    let code = generate_code(req.n, req.m as usize, derive_seed(req.seed, Purpose::Code, i)).expect("size checked");
    let y = bsc_transmit(code.row(0), req.n, req.p, derive_seed(req.seed, Purpose::Noise, i)).expect("p checked");
    let decision = ml_decode(&code, &y, req.tie, Some(0), derive_seed(req.seed, Purpose::Coin, i));
    decision.index != Some(0)
}

fn distance_sampled_trial(req: &SimRequest, law: &CompetitorLaw, i: u64) -> bool {
    let mut rng = stream(req.seed, Purpose::TrueDistance, i);
    let dm = sample_true_distance(req.n, req.p, &mut rng);
    let mut comp = stream(req.seed, Purpose::Competitors, i);
    let hist = law.histogram(req.m - 1, dm, &mut comp);
    if hist[..dm].iter().any(|&c| c > 0) {
        return true;
    }
    let ties = hist[dm];
    match req.tie {
        TiePolicy::TiesAsError => ties > 0,
        TiePolicy::RandomTieBreak => {
            ties > 0 && stream(req.seed, Purpose::Coin, i).random_range(0..=ties) != 0
        }
    }
}

/// Average over codes of the worst message's error probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxErrorSummary {
    pub codes: u64,
    pub m: u64,
    pub noise_trials_per_message: u64,
    pub mean_max: f64,
    /// 95% half-width from the spread of per-code maxima.
    pub ci_half_width: f64,
    pub message_average: TrialSummary,
}

/// Per-message error estimates for one fixed code.
pub fn per_message_errors(code: &PackedCode, p: f64, tie: TiePolicy, noise_trials: u64, seed: u64) -> Result<Vec<u64>> {
    check_range("p", p, 0.0, 0.5)?;
    let mut out = Vec::with_capacity(code.m());
    for msg in 0..code.m() {
        let msg_seed = derive_seed(seed, Purpose::Message, msg as u64);
        let mut errors = 0;
        for j in 0..noise_trials {
            let y = bsc_transmit(code.row(msg), code.n(), p, derive_seed(msg_seed, Purpose::Noise, j))?;
            let d = ml_decode(code, &y, tie, Some(msg), derive_seed(msg_seed, Purpose::Coin, j));
            if d.index != Some(msg) {
                errors += 1;
            }
        }
        out.push(errors);
    }
    Ok(out)
}

pub fn estimate_max_error(
    p: f64,
    rate: f64,
    n: usize,
    codes: u64,
    noise_trials_per_message: u64,
    tie: TiePolicy,
    seed: u64,
) -> Result<MaxErrorSummary> {
    let m = codebook_size(rate, n)?;
    estimate_max_error_with_codebook_size(p, n, m, codes, noise_trials_per_message, tie, seed)
}

pub fn estimate_max_error_with_codebook_size(
    p: f64,
    n: usize,
    m: u64,
    codes: u64,
    noise_trials_per_message: u64,
    tie: TiePolicy,
    seed: u64,
) -> Result<MaxErrorSummary> {
    check_range("p", p, 0.0, 0.5)?;
    if codes == 0 || noise_trials_per_message == 0 {
        return Err(Error::Invalid("need codes >= 1 and noise trials >= 1".into()));
    }
    let bytes = limbs_for(n) as u128 * m as u128 * 8;
    if bytes > DEFAULT_MEMORY_CAP_BYTES as u128 {
        return Err(Error::Cap {
            requested: bytes,
            cap: DEFAULT_MEMORY_CAP_BYTES as u128,
        });
    }
    let per_code: Vec<Result<Vec<u64>>> = map_over(codes, |c| {
        let code = generate_code(n, m as usize, derive_seed(seed, Purpose::Code, c))?;
        per_message_errors(&code, p, tie, noise_trials_per_message, derive_seed(seed, Purpose::Noise, c))
    });
    let mut maxima = Vec::with_capacity(codes as usize);
    let mut total_errors = 0u64;
    for errs in per_code {
        let errs = errs?;
        total_errors += errs.iter().sum::<u64>();
        let worst = errs.iter().copied().max().unwrap_or(0);
        maxima.push(worst as f64 / noise_trials_per_message as f64);
    }
    let k = maxima.len() as f64;
    let mean_max = maxima.iter().sum::<f64>() / k;
    let var = if maxima.len() > 1 {
        maxima.iter().map(|x| (x - mean_max).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    let total_trials = codes * m * noise_trials_per_message;
    Ok(MaxErrorSummary {
        codes,
        m,
        noise_trials_per_message,
        mean_max,
        ci_half_width: Z_95 * (var / k).sqrt(),
        message_average: TrialSummary::new(p, n, m, SimMode::FullEnsemble, tie, total_trials, total_errors, seed),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSample {
    pub d_m: usize,
    /// `ln T`, `T = Σ_{j≠m} z^{d_j}`.
    pub ln_t: f64,
    pub pi_m: f64,
    /// `min_{j≠m} d_j <= d_m`.
    pub error: bool,
}

fn posterior_from(d_m: usize, ln_t: f64, ln_z: f64, error: bool) -> PosteriorSample {
    let own = if d_m == 0 { 0.0 } else { d_m as f64 * ln_z };
    let pi_m = (own - log_add(own, ln_t)).exp();
    PosteriorSample {
        d_m,
        ln_t,
        pi_m,
        error,
    }
}

/// Draw `(d_m, ln T, π_m, error)` for the transmitted message.
pub fn sample_posterior(p: f64, rate: f64, n: usize, samples: u64, mode: SimMode, seed: u64) -> Result<Vec<PosteriorSample>> {
    let m = codebook_size(rate, n)?;
    sample_posterior_with_codebook_size(p, n, m, samples, mode, seed)
}

pub fn sample_posterior_with_codebook_size(
    p: f64,
    n: usize,
    m: u64,
    samples: u64,
    mode: SimMode,
    seed: u64,
) -> Result<Vec<PosteriorSample>> {
    if !(p > 0.0 && p <= 0.5) {
        return Err(Error::OutOfRange {
            what: "p",
            value: p,
            lo: 0.0,
            hi: 0.5,
        });
    }
    let ln_z = p.ln() - (-p).ln_1p();
    match mode {
        SimMode::FullEnsemble => {
            let bytes = limbs_for(n) as u128 * m as u128 * 8;
            if bytes > DEFAULT_MEMORY_CAP_BYTES as u128 {
                return Err(Error::Cap {
                    requested: bytes,
                    cap: DEFAULT_MEMORY_CAP_BYTES as u128,
                });
            }
            let out = map_over(samples, |i| {
                let code = generate_code(n, m as usize, derive_seed(seed, Purpose::Code, i)).expect("size checked");
                let y = bsc_transmit(code.row(0), n, p, derive_seed(seed, Purpose::Noise, i)).expect("p checked");
                let d_m = code.distance(0, &y) as usize;
                let dists: Vec<u32> = (1..code.m()).map(|j| code.distance(j, &y)).collect();
                let ln_t = log_sum_exp_f64(dists.iter().map(|&d| d as f64 * ln_z));
                let error = dists.iter().any(|&d| d as usize <= d_m);
                posterior_from(d_m, ln_t, ln_z, error)
            });
            Ok(out)
        }
        SimMode::DistanceSampled => {
            let law = CompetitorLaw::new(n)?;
            let out = map_over(samples, |i| {
                let mut rng = stream(seed, Purpose::TrueDistance, i);
                let d_m = sample_true_distance(n, p, &mut rng);
                let mut comp = stream(seed, Purpose::Competitors, i);
                let hist = law.histogram(m - 1, n, &mut comp);
                let ln_t = log_sum_exp_f64(
                    hist.iter()
                        .enumerate()
                        .filter(|(_, c)| **c > 0)
                        .map(|(d, c)| (*c as f64).ln() + d as f64 * ln_z),
                );
                let error = hist[..=d_m].iter().any(|&c| c > 0);
                posterior_from(d_m, ln_t, ln_z, error)
            });
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn code_is_deterministic_and_masked() {
        let a = generate_code(70, 5, 11).unwrap();
        let b = generate_code(70, 5, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_code(70, 5, 12).unwrap());
        for i in 0..5 {
            assert_eq!(a.row(i)[1] >> 6, 0);
        }
        assert!(matches!(
            generate_code_capped(1000, 1000, 0, 1024),
            Err(Error::Cap { .. })
        ));
    }

    #[test]
    fn code_weights_look_binomial() {
        let n = 10_000;
        let code = generate_code(n, 100, 3).unwrap();
        let sigma = (n as f64 / 4.0).sqrt();
        let mean = (0..100).map(|i| code.weight(i) as f64).sum::<f64>() / 100.0;
        // Mean of 100 rows has standard deviation sigma / 10.
        assert!((mean - n as f64 / 2.0).abs() <= 4.0 * sigma / 10.0);
    }

    #[test]
    fn bit_frequencies_pass_chi_square() {
        // 1 dof chi-square; the 1e-6 upper quantile is 23.928.
        let code = generate_code(1000, 1000, 99).unwrap();
        let ones: u64 = (0..1000).map(|i| code.weight(i) as u64).sum();
        let total = 1_000_000f64;
        let e = total / 2.0;
        let chi = (ones as f64 - e).powi(2) / e + ((total - ones as f64) - e).powi(2) / e;
        assert!(chi < 23.928, "chi2 = {chi}");
    }

    #[test]
    fn transmit_extremes_and_mean() {
        let code = generate_code(130, 1, 5).unwrap();
        let x = code.row(0);
        assert_eq!(bsc_transmit(x, 130, 0.0, 1).unwrap(), x.to_vec());
        let y = bsc_transmit(x, 130, 1.0, 1).unwrap();
        assert_eq!(hamming(x, &y), 130);

        let n = 10_000;
        let code = generate_code(n, 1, 5).unwrap();
        let y = bsc_transmit(code.row(0), n, 0.5, 77).unwrap();
        let d = hamming(code.row(0), &y) as f64;
        assert!((d - 5000.0).abs() <= 4.0 * 50.0);
    }

    #[test]
    fn decode_unique_minimum() {
        let code = PackedCode::from_words(4, 3, vec![0b0000, 0b0111, 0b1111]).unwrap();
        let d = ml_decode(&code, &[0b0111], TiePolicy::TiesAsError, None, 0);
        assert_eq!(d.index, Some(1));
        assert_eq!(d.min_distance, 0);
    }

    #[test]
    fn decode_matches_exhaustive_table() {
        let rows = [0b0000u64, 0b0111, 0b1100];
        let code = PackedCode::from_words(4, 3, rows.to_vec()).unwrap();
        for y in 0u64..16 {
            let dists: Vec<u32> = rows.iter().map(|r| (r ^ y).count_ones()).collect();
            let min = *dists.iter().min().unwrap();
            let argmins: Vec<usize> = (0..3).filter(|&i| dists[i] == min).collect();
            let d = ml_decode(&code, &[y], TiePolicy::RandomTieBreak, None, y);
            assert_eq!(d.min_distance, min);
            assert_eq!(d.minimizers, argmins.len());
            assert!(argmins.contains(&d.index.unwrap()));
            for truth in 0..3 {
                let d = ml_decode(&code, &[y], TiePolicy::TiesAsError, Some(truth), 0);
                let beaten = (0..3).any(|j| j != truth && dists[j] <= dists[truth]);
                assert_eq!(d.index.is_none(), beaten);
            }
        }
    }

    #[test]
    fn random_tie_break_is_fair() {
        let code = PackedCode::from_words(2, 2, vec![0b01, 0b10]).unwrap();
        let trials = 20_000u64;
        let firsts = (0..trials)
            .filter(|&s| ml_decode(&code, &[0b00], TiePolicy::RandomTieBreak, None, s).index == Some(0))
            .count() as f64;
        let sigma = (trials as f64 * 0.25).sqrt();
        assert!((firsts - trials as f64 / 2.0).abs() <= 4.0 * sigma);
    }

    fn cell(p: f64, n: usize, m: u64, mode: SimMode, tie: TiePolicy, trials: u64) -> TrialSummary {
        estimate_with_codebook_size(SimRequest {
            p,
            n,
            m,
            trials,
            mode,
            tie,
            seed: 2024,
        })
        .unwrap()
    }

    #[test]
    fn small_cells_hit_enumerated_values() {
        for mode in [SimMode::FullEnsemble, SimMode::DistanceSampled] {
            let s = cell(0.1, 1, 2, mode, TiePolicy::TiesAsError, 200_000);
            assert!((s.estimate - 0.55).abs() <= 4.0 * s.ci_half_width, "{mode:?}: {}", s.estimate);
            let s = cell(0.0, 2, 2, mode, TiePolicy::TiesAsError, 200_000);
            assert!((s.estimate - 0.25).abs() <= 4.0 * s.ci_half_width);
            let s = cell(0.1, 1, 2, mode, TiePolicy::RandomTieBreak, 200_000);
            assert!((s.estimate - 0.3).abs() <= 4.0 * s.ci_half_width);
        }
    }

    #[test]
    fn summary_fields_are_consistent() {
        let s = cell(0.1, 16, 9, SimMode::DistanceSampled, TiePolicy::TiesAsError, 10_000);
        assert_eq!(s.estimate, s.errors as f64 / s.trials as f64);
        let hw = 1.96 * (s.estimate * (1.0 - s.estimate) / s.trials as f64).sqrt();
        assert_eq!(s.ci_half_width, hw);
        assert_eq!(codebook_size(0.2, 16).unwrap(), 25);
        assert!(codebook_size(0.5, 200).is_err());
    }

    #[test]
    fn max_error_cases() {
        let s = estimate_max_error_with_codebook_size(0.1, 8, 1, 10, 100, TiePolicy::TiesAsError, 1).unwrap();
        assert_eq!(s.mean_max, 0.0);

        let dup = PackedCode::from_words(5, 3, vec![0b10101, 0b10101, 0b00011]).unwrap();
        let errs = per_message_errors(&dup, 0.1, TiePolicy::TiesAsError, 200, 4).unwrap();
        assert_eq!(errs[0], 200);
        assert_eq!(errs[1], 200);
    }

    #[test]
    fn posterior_at_z_one_is_uniform() {
        for mode in [SimMode::FullEnsemble, SimMode::DistanceSampled] {
            let out = sample_posterior_with_codebook_size(0.5, 20, 7, 200, mode, 3).unwrap();
            for s in out {
                assert!((s.pi_m - 1.0 / 7.0).abs() < 1e-14);
            }
        }
        assert!(sample_posterior_with_codebook_size(0.0, 20, 7, 10, SimMode::DistanceSampled, 3).is_err());
    }

    #[test]
    fn errors_imply_small_posterior() {
        for mode in [SimMode::FullEnsemble, SimMode::DistanceSampled] {
            let out = sample_posterior(0.1, 0.2, 24, 5_000, mode, 8).unwrap();
            assert!(out.iter().any(|s| s.error));
            for s in out.iter().filter(|s| s.error) {
                assert!(s.pi_m <= 0.5 + 1e-15);
            }
            for s in &out {
                assert!(s.pi_m > 0.0 && s.pi_m < 1.0);
            }
        }
    }

    #[test]
    fn competitor_sum_has_analytic_mean() {
        // E[z^{Bin(n,1/2)}] = ((1+z)/2)^n per competitor.
        let (p, rate, n) = (0.1, 0.2, 40);
        let m = codebook_size(rate, n).unwrap();
        let z = p / (1.0 - p);
        let samples = 20_000u64;
        let per = ((1.0 + z) / 2.0f64).powi(n as i32);
        let var_one = ((1.0 + z * z) / 2.0f64).powi(n as i32) - per * per;
        let mean = (m - 1) as f64 * per;
        let sd = ((m - 1) as f64 * var_one / samples as f64).sqrt();
        for mode in [SimMode::FullEnsemble, SimMode::DistanceSampled] {
            let out = sample_posterior(p, rate, n, samples, mode, 21).unwrap();
            let emp = out.iter().map(|s| s.ln_t.exp()).sum::<f64>() / samples as f64;
            assert!((emp - mean).abs() <= 4.0 * sd, "{mode:?}: {emp} vs {mean} ± {sd}");
        }
    }
}

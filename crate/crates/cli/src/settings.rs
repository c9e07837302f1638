//! Flag and config-file handling.
//!
//! A config file holds `key = value` lines whose keys are the long flag names
//! (`n-grid` or `n_grid`). Blank lines and `#` comments are ignored. Flags
//! given on the command line win over the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bsc_exponent::exponents::capacity;
use bsc_exponent::simulator::SimMode;
use bsc_exponent::{ChannelBsc, TiePolicy};
use clap::{Args, ValueEnum};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TieArg {
    Error,
    Random,
}

impl From<TieArg> for TiePolicy {
    fn from(t: TieArg) -> Self {
        match t {
            TieArg::Error => TiePolicy::TiesAsError,
            TieArg::Random => TiePolicy::RandomTieBreak,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Full,
    Distance,
}

impl From<ModeArg> for SimMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Full => SimMode::FullEnsemble,
            ModeArg::Distance => SimMode::DistanceSampled,
        }
    }
}

#[derive(Args, Clone, Debug, Default)]
pub struct Opts {
    /// Crossover probability.
    #[arg(long)]
    pub p: Option<f64>,
    /// A single rate in nats.
    #[arg(long, conflicts_with = "rates")]
    pub rate: Option<f64>,
    /// Rates: `0.05,0.2,0.3` or `a..b:K` for K evenly spaced points.
    #[arg(long)]
    pub rates: Option<String>,
    /// A single block length.
    #[arg(long, conflicts_with = "n_grid")]
    pub n: Option<usize>,
    /// Block lengths: `16,24`, `a..b`, `a..b:geometric` (doubling) or
    /// `a..b:geometric:r`.
    #[arg(long)]
    pub n_grid: Option<String>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long, value_enum)]
    pub tie_policy: Option<TieArg>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// `key = value` file supplying defaults for any of the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim()
        .parse()
        .map_err(|_| usage(format!("cannot parse {key} = '{v}'")))
}

fn parse_enum<T: ValueEnum>(key: &str, v: &str) -> Result<T, CliError> {
    T::from_str(v.trim(), true).map_err(|_| usage(format!("invalid {key} = '{v}'")))
}

pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key = value", i + 1)))?;
        out.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(out)
}

impl Opts {
    /// Fill unset fields from the config file named by `--config`.
    pub fn with_config(mut self) -> Result<Self, CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        for (k, v) in read_config(&path)? {
            match k.as_str() {
                "p" => self.p = self.p.or(Some(parse_num(&k, &v)?)),
                "rate" => {
                    if self.rate.is_none() && self.rates.is_none() {
                        self.rate = Some(parse_num(&k, &v)?);
                    }
                }
                "rates" => {
                    if self.rate.is_none() && self.rates.is_none() {
                        self.rates = Some(v);
                    }
                }
                "n" => {
                    if self.n.is_none() && self.n_grid.is_none() {
                        self.n = Some(parse_num(&k, &v)?);
                    }
                }
                "n-grid" => {
                    if self.n.is_none() && self.n_grid.is_none() {
                        self.n_grid = Some(v);
                    }
                }
                "trials" => self.trials = self.trials.or(Some(parse_num(&k, &v)?)),
                "samples" => self.samples = self.samples.or(Some(parse_num(&k, &v)?)),
                "tie-policy" => self.tie_policy = self.tie_policy.or(Some(parse_enum(&k, &v)?)),
                "mode" => self.mode = self.mode.or(Some(parse_enum(&k, &v)?)),
                "seed" => self.seed = self.seed.or(Some(parse_num(&k, &v)?)),
                "out" => self.out = self.out.take().or(Some(PathBuf::from(v))),
                "format" => self.format = self.format.or(Some(parse_enum(&k, &v)?)),
                other => return Err(usage(format!("unknown config key '{other}'"))),
            }
        }
        Ok(self)
    }
}

/// Rates from `0.1,0.2` or `a..b:K`.
pub fn parse_rates(text: &str) -> Result<Vec<f64>, CliError> {
    let text = text.trim();
    if let Some((range, count)) = text.split_once(':') {
        let (a, b) = range
            .split_once("..")
            .ok_or_else(|| usage(format!("bad rate range '{text}'")))?;
        let a: f64 = parse_num("rates", a)?;
        let b: f64 = parse_num("rates", b)?;
        let k: usize = parse_num("rates", count)?;
        if k < 2 || !(b > a) {
            return Err(usage(format!("rate range '{text}' needs a < b and K >= 2")));
        }
        return Ok((0..k)
            .map(|i| if i + 1 == k { b } else { a + (b - a) * i as f64 / (k - 1) as f64 })
            .collect());
    }
    text.split(',').map(|t| parse_num("rates", t)).collect()
}

/// Block lengths from a list, `a..b`, `a..b:geometric` or `a..b:geometric:r`.
pub fn parse_n_grid(text: &str) -> Result<Vec<usize>, CliError> {
    let text = text.trim();
    let grid: Vec<usize> = if let Some((a, rest)) = text.split_once("..") {
        let mut parts = rest.split(':');
        let b = parts.next().unwrap_or("");
        let a: usize = parse_num("n-grid", a)?;
        let b: usize = parse_num("n-grid", b)?;
        if a == 0 || b < a {
            return Err(usage(format!("n-grid '{text}' needs 1 <= a <= b")));
        }
        match (parts.next(), parts.next(), parts.next()) {
            (None, _, _) => (a..=b).collect(),
            (Some("geometric"), ratio, None) => {
                let r: usize = match ratio {
                    Some(r) => parse_num("n-grid", r)?,
                    None => 2,
                };
                if r < 2 {
                    return Err(usage("geometric ratio must be >= 2"));
                }
                std::iter::successors(Some(a), |&x| x.checked_mul(r))
                    .take_while(|&x| x <= b)
                    .collect()
            }
            _ => return Err(usage(format!("bad n-grid '{text}'"))),
        }
    } else {
        text.split(',')
            .map(|t| parse_num("n-grid", t))
            .collect::<Result<_, _>>()?
    };
    if grid.is_empty() || grid.contains(&0) {
        return Err(usage(format!("n-grid '{text}' is empty or contains 0")));
    }
    if !grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(usage(format!("n-grid '{text}' must be strictly increasing")));
    }
    Ok(grid)
}

/// Fully resolved inputs for one subcommand.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub p: f64,
    pub rates: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub trials: u64,
    pub samples: u64,
    pub tie: TiePolicy,
    pub mode: SimMode,
    pub seed: u64,
    pub format: Format,
    pub out: Option<PathBuf>,
}

/// Per-subcommand defaults, used where neither flag nor config sets a value.
pub struct Defaults {
    pub p: f64,
    pub rates: RateDefault,
    pub n_grid: &'static str,
    pub trials: u64,
    pub samples: u64,
    pub format: Format,
}

pub enum RateDefault {
    List(&'static [f64]),
    /// `K` evenly spaced points over `[0, C]`.
    SweepToCapacity(usize),
}

impl Opts {
    pub fn resolve(self, d: &Defaults) -> Result<Settings, CliError> {
        let o = self.with_config()?;
        let p = o.p.unwrap_or(d.p);
        if !(0.0..=0.5).contains(&p) {
            return Err(usage(format!("--p {p} must lie in [0, 0.5]")));
        }
        let rates = match (o.rate, &o.rates) {
            (Some(r), _) => vec![r],
            (None, Some(s)) => parse_rates(s)?,
            (None, None) => match d.rates {
                RateDefault::List(xs) => xs.to_vec(),
                RateDefault::SweepToCapacity(k) => {
                    let c = capacity(&ChannelBsc::new(p).map_err(|e| usage(e.to_string()))?);
                    (0..k)
                        .map(|i| if i + 1 == k { c } else { c * i as f64 / (k - 1) as f64 })
                        .collect()
                }
            },
        };
        if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(usage("rates must be finite and >= 0"));
        }
        let n_grid = match (o.n, &o.n_grid) {
            (Some(0), _) => return Err(usage("--n must be >= 1")),
            (Some(n), _) => vec![n],
            (None, Some(s)) => parse_n_grid(s)?,
            (None, None) => parse_n_grid(d.n_grid)?,
        };
        let trials = o.trials.unwrap_or(d.trials);
        let samples = o.samples.unwrap_or(d.samples);
        if trials == 0 || samples == 0 {
            return Err(usage("--trials and --samples must be >= 1"));
        }
        Ok(Settings {
            p,
            rates,
            n_grid,
            trials,
            samples,
            tie: o.tie_policy.map(Into::into).unwrap_or_default(),
            mode: o.mode.map(Into::into).unwrap_or_default(),
            seed: o.seed.unwrap_or(1),
            format: o.format.unwrap_or(d.format),
            out: o.out,
        })
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("NaN produced where a log-domain value was expected")]
    NaN,

    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("probabilities are not normalized: p + q = {0}")]
    NotNormalized(f64),

    #[error("target {target} is not bracketed by f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NotBracketed { target: f64, f_lo: f64, f_hi: f64 },

    #[error("non-finite function value at x = {0}")]
    NonFinite(f64),

    #[error("invalid parameter: {0}")]
    Invalid(String),

    #[error("grid needs at least {needed} strictly increasing points, got {got}")]
    Grid { needed: usize, got: usize },

    #[error("request of {requested} exceeds the configured cap of {cap}")]
    Cap { requested: u128, cap: u128 },
}

pub(crate) fn check_range(what: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if value.is_nan() || value < lo || value > hi {
        return Err(Error::OutOfRange { what, value, lo, hi });
    }
    Ok(())
}

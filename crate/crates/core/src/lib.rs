//! Random-coding error exponent laboratory for the binary symmetric channel.
//!
//! The crate is organized bottom-up:
//!
//! - [`logmath`]: extended-log-domain arithmetic, binomial tables, bisection.
//! - [`exponents`]: closed-form rates and exponents (capacity, critical rates,
//!   sphere-packing, the printed piecewise formula) and the variational
//!   programs behind them.
//! - [`oracle`]: exact ensemble-average decoding error probability at finite
//!   block length, and exponent extraction over a grid of block lengths.
//! - [`simulator`]: Monte Carlo over real random codebooks or sampled
//!   distance profiles.
//! - [`statsum`]: the statistical sum `S(z, M, n) = Σ z^{w_j}` and its
//!   concentration check.
//!
//! All probabilities travel as natural logarithms ([`LogReal`]) because the
//! codebook size `M = e^{Rn}` and the error probabilities at interesting
//! block lengths are far outside the range of `f64`.

pub mod error;
pub mod exponents;
pub mod logmath;
pub mod optimize;
pub mod oracle;
pub mod rng;
pub mod simulator;
pub mod statsum;

pub use error::{Error, Result};
pub use exponents::{BranchReport, ChannelBsc, RatePoint, SelectedBranch};
pub use logmath::{BinomialTable, LogReal};
pub use oracle::{OracleResult, TiePolicy};
pub use simulator::{PackedCode, SimMode, TrialSummary};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

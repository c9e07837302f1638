//! Reproducible random streams keyed by `(seed, purpose, index)`.
//!
//! Every trial, codeword row, or sample gets its own ChaCha stream, so results
//! do not depend on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Code = 1,
    Noise = 2,
    Coin = 3,
    TrueDistance = 4,
    Competitors = 5,
    Weights = 6,
    Message = 7,
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// A child seed for `(purpose, index)` under `seed`.
pub fn derive_seed(seed: u64, purpose: Purpose, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(purpose as u64)) ^ index)
}

/// Stream `index` of the generator keyed by `(seed, purpose)`.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let key = splitmix64(seed ^ splitmix64(purpose as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

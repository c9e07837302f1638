//! Exhaustive enumeration of every codebook and every channel output for
//! tiny `(n, M)`.
//!
//! Error counts are integers in units of `1/12` (the lcm of tie sizes up to
//! 4), grouped by the Hamming weight of the noise pattern, so `p` enters only
//! at the end.

use bsc_exponent::TiePolicy;

pub const UNITS: u64 = 12;

/// Error units per noise weight for both tie policies, over all codebooks
/// and all outputs, with codeword `sent` transmitted. Index `w` collects the
/// noise patterns of weight `w`.
pub struct Counts {
    pub ties_as_error: Vec<u64>,
    pub random: Vec<u64>,
}

impl Counts {
    pub fn get(&self, tie: TiePolicy) -> &[u64] {
        match tie {
            TiePolicy::TiesAsError => &self.ties_as_error,
            TiePolicy::RandomTieBreak => &self.random,
        }
    }
}

pub fn enumerate(n: usize, m: usize, sent: usize) -> Counts {
    let words = 1u32 << n;
    let books = 1u64 << (n * m);
    let mask = words - 1;
    let mut out = Counts {
        ties_as_error: vec![0; n + 1],
        random: vec![0; n + 1],
    };
    let mut code = [0u32; 4];
    for book in 0..books {
        for (j, c) in code.iter_mut().take(m).enumerate() {
            *c = (book >> (j * n)) as u32 & mask;
        }
        let x = code[sent];
        for e in 0..words {
            let y = x ^ e;
            let own = e.count_ones();
            // Competitors strictly closer, and at the same distance.
            let mut closer = 0u64;
            let mut level = 0u64;
            for (j, c) in code.iter().take(m).enumerate() {
                if j != sent {
                    let d = (c ^ y).count_ones();
                    closer += u64::from(d < own);
                    level += u64::from(d == own);
                }
            }
            let w = own as usize;
            if closer > 0 {
                out.ties_as_error[w] += UNITS;
                out.random[w] += UNITS;
            } else if level > 0 {
                out.ties_as_error[w] += UNITS;
                out.random[w] += UNITS - UNITS / (level + 1);
            }
        }
    }
    out
}

pub fn combine(counts: &[u64], n: usize, m: usize, p: f64) -> f64 {
    let q = 1.0 - p;
    let books = (1u64 << (n * m)) as f64;
    counts
        .iter()
        .enumerate()
        .map(|(w, &c)| c as f64 * p.powi(w as i32) * q.powi((n - w) as i32))
        .sum::<f64>()
        / (UNITS as f64 * books)
}


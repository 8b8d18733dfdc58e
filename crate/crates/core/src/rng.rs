//! Deterministic random streams for reproducible experiments.
//!
//! The generator is SplitMix64 (Vigna's public-domain `splitmix64.c`): a
//! 64-bit Weyl counter pushed through a two-round xor-multiply finalizer.
//! Being counter-based, it makes substream derivation trivial —
//! [`stream_seed`] hashes `(master_seed, stream_index)` into an independent
//! seed, so a batch of runs produces identical traces no matter how many
//! worker threads execute it or in which order.
//!
//! All samplers are spelled out here rather than delegated to a
//! distributions crate so that every draw is pinned by this file alone:
//! uniform doubles take the top 53 bits of a word, Gaussians use
//! Box–Muller, and Cauchy deviates use the inverse CDF `tan(pi*(u - 1/2))`.

use std::f64::consts::PI;

/// Weyl increment from the reference implementation (the 64-bit golden ratio).
const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// `splitmix64` finalizer: two xor-shift-multiply rounds and a closing shift.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed for one run's private stream from the experiment's
/// master seed and the run index.
///
/// The construction is `mix(master_seed ^ mix(index + 1))`: index is
/// finalized first so that neighbouring runs land in unrelated parts of the
/// sequence, then folded into the master seed and finalized again. Distinct
/// indices under the same master seed give distinct streams, and the result
/// depends only on the pair, never on execution order.
pub fn stream_seed(master_seed: u64, stream_index: u64) -> u64 {
    mix(master_seed ^ mix(stream_index.wrapping_add(1)))
}

/// SplitMix64 generator state.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Next raw 64-bit word.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    /// Uniform double in `[0, 1)` from the top 53 bits of one word.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `[0, n)`.
    ///
    /// Plain modulo reduction; the bias is below n / 2^64, irrelevant for
    /// the population and genome sizes used here, and the method is trivial
    /// to reproduce in any other implementation.
    pub fn next_index(&mut self, n: usize) -> usize {
        assert!(n > 0, "next_index needs a non-empty range");
        (self.next_u64() % n as u64) as usize
    }

    /// Uniform double in `[lo, hi)`.
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal deviate via Box–Muller.
    ///
    /// Consumes exactly two words: `z = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`.
    /// The second Box–Muller branch is discarded so that the draw count per
    /// call is constant.
    pub fn next_normal(&mut self) -> f64 {
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    /// Standard Cauchy deviate via the inverse CDF `tan(pi*(u - 1/2))`.
    pub fn next_cauchy(&mut self) -> f64 {
        (PI * (self.next_f64() - 0.5)).tan()
    }
}

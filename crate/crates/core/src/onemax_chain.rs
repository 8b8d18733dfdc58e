//! Transition models for the (1+1) one-bit-flip search on the bit-counting
//! objective, at two resolutions.
//!
//! The search flips one uniformly chosen bit per generation and accepts
//! strict improvements only, so the number of wrong (zero) bits never
//! increases. That gives an absorbing chain with two natural state spaces:
//!
//! * **lumped** — one state per fitness level. `S_k` collects all strings
//!   with `k` wrong bits; from `S_k` the flip hits a wrong bit with
//!   probability `k/n` (level drops to `S_(k-1)`) and anything else keeps
//!   the level. With `n` states this is the model every closed form is
//!   written against: spectral radius `1 - 1/n`, hitting times `n * H_k`.
//! * **full** — one state per non-optimal bitstring, `2^n - 1` states.
//!   No aggregation at all; it exists to validate the lumped model, since
//!   both must produce identical gap curves from matching initializations.
//!
//! Full-chain states are ordered by descending ones-count, ties by
//! ascending numeric value. Every accepted move gains a one, so all motion
//! goes to earlier indices and `Q` comes out lower triangular by
//! construction — which the spectral code exploits.

use crate::chain_model::{ChainError, DistributionVector, TransitionModel};
use crate::linalg::Matrix;
use crate::objectives::Direction;

/// Largest `n` for which the `2^n - 1`-state full chain may be built.
pub const FULL_CHAIN_MAX_N: usize = 20;

/// State-space resolution of a bit-counting chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OneMaxVariant {
    Lumped,
    Full,
}

impl OneMaxVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            OneMaxVariant::Lumped => "lumped",
            OneMaxVariant::Full => "full",
        }
    }
}

/// Fitness-level chain on `n` bits: states `S_1..S_n`, where `S_k` holds
/// every string with `k` zeros and has fitness `n - k`.
pub fn build_lumped(n: usize) -> Result<TransitionModel, ChainError> {
    if n == 0 {
        return Err(ChainError::Empty);
    }
    let nf = n as f64;
    let mut q = Matrix::zeros(n, n);
    let mut escape = vec![0.0; n];
    let mut labels = Vec::with_capacity(n);
    let mut fitness = Vec::with_capacity(n);
    for i in 0..n {
        let k = i + 1; // S_k has k wrong bits
        q.set(i, i, 1.0 - k as f64 / nf);
        if i == 0 {
            // One wrong bit left: the improving flip is absorption itself.
            escape[0] = 1.0 / nf;
        } else {
            q.set(i, i - 1, k as f64 / nf);
        }
        labels.push(format!("S_{k}"));
        fitness.push(nf - k as f64);
    }
    TransitionModel::new(labels, q, escape, fitness, nf, Direction::Maximize)
}

/// Bitstring-level chain on `n` bits: one state for each of the `2^n - 1`
/// non-optimal strings, labeled by their bits most-significant first.
pub fn build_full(n: usize) -> Result<TransitionModel, ChainError> {
    if n == 0 {
        return Err(ChainError::Empty);
    }
    if n > FULL_CHAIN_MAX_N {
        return Err(ChainError::FullChainTooLarge {
            n,
            max: FULL_CHAIN_MAX_N,
        });
    }
    let optimum: u32 = (1u32 << n) - 1;
    let mut order: Vec<u32> = (0..optimum).collect();
    order.sort_by_key(|&x| (std::cmp::Reverse(x.count_ones()), x));
    let index_of = {
        let mut map = vec![usize::MAX; optimum as usize];
        for (idx, &x) in order.iter().enumerate() {
            map[x as usize] = idx;
        }
        map
    };

    let states = order.len();
    let nf = n as f64;
    let flip = 1.0 / nf;
    let mut q = Matrix::zeros(states, states);
    let mut escape = vec![0.0; states];
    let mut labels = Vec::with_capacity(states);
    let mut fitness = Vec::with_capacity(states);
    for (row, &x) in order.iter().enumerate() {
        let ones = x.count_ones();
        q.set(row, row, ones as f64 / nf);
        for bit in 0..n {
            if x & (1 << bit) == 0 {
                let y = x | (1 << bit);
                if y == optimum {
                    escape[row] = flip;
                } else {
                    q.set(row, index_of[y as usize], flip);
                }
            }
        }
        labels.push(bit_label(x, n));
        fitness.push(ones as f64);
    }
    TransitionModel::new(labels, q, escape, fitness, nf, Direction::Maximize)
}

fn bit_label(x: u32, n: usize) -> String {
    (0..n)
        .rev()
        .map(|bit| if x & (1 << bit) != 0 { '1' } else { '0' })
        .collect()
}

/// The distribution a uniform random initial bitstring induces on the
/// transient states at either resolution: binomial weights
/// `C(n,k) / 2^n` on the level `S_k`, or `1 / 2^n` per string.
///
/// Total mass is `1 - 2^(-n)`; the missing sliver is the chance of
/// starting at the optimum outright.
pub fn binomial_init(n: usize, variant: OneMaxVariant) -> Result<DistributionVector, ChainError> {
    if n == 0 {
        return Err(ChainError::Empty);
    }
    let mass = match variant {
        OneMaxVariant::Lumped => {
            let denom = 2f64.powi(n as i32);
            (1..=n).map(|k| binomial(n, k) as f64 / denom).collect()
        }
        OneMaxVariant::Full => {
            if n > FULL_CHAIN_MAX_N {
                return Err(ChainError::FullChainTooLarge {
                    n,
                    max: FULL_CHAIN_MAX_N,
                });
            }
            let states = (1usize << n) - 1;
            vec![2f64.powi(-(n as i32)); states]
        }
    };
    Ok(DistributionVector::new(mass, 0))
}

/// Exact binomial coefficient by the multiplicative formula; every
/// intermediate division is exact. Comfortably inside `u128` for the
/// `n <= 50` range the sweep experiments use.
fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 1..=k {
        result = result * (n - k + i) as u128 / i as u128;
    }
    result
}

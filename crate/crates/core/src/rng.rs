//! Explicitly passed random streams.
//!
//! Nothing in this crate touches a global generator: every stochastic
//! operation borrows an [`RngState`]. Child streams are derived from a master
//! seed and an index so per-sample randomness does not depend on scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

/// Fractional part of the golden ratio in 64-bit fixed point.
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The splitmix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of child stream `index` under `master`:
/// `splitmix64(master ^ GOLDEN_GAMMA * (index + 1))`.
pub fn child_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1)))
}

#[derive(Clone, Debug)]
pub struct RngState {
    seed: u64,
    inner: ChaCha20Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState {
            seed,
            inner: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn derive_child(master: u64, index: u64) -> Self {
        RngState::new(child_seed(master, index))
    }

    /// Child of this stream's seed (independent of how much has been drawn).
    pub fn child(&self, index: u64) -> Self {
        RngState::derive_child(self.seed, index)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits.
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    /// Random sign, each with probability one half.
    pub fn rademacher(&mut self) -> f64 {
        if self.inner.next_u32() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

impl RngCore for RngState {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

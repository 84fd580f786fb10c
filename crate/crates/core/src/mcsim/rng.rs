//! Seeded random streams for the Monte Carlo estimator.
//!
//! The generator is PCG XSL-RR 128/64 (`Pcg64`): a 128-bit LCG state, a
//! 128-bit odd increment and a 64-bit output permutation. A `u64` seed is
//! expanded into state and increment with four SplitMix64 outputs, and
//! uniforms take the top 53 bits of each output. Every step is integer
//! arithmetic, so a given seed yields the same stream on every platform.

use rand_core::Rng;
use rand_pcg::Pcg64;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// One SplitMix64 step: advances `state` and returns the mixed output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Seed of the substream for `stream_id` under `global_seed`.
///
/// Depends only on its two inputs, so serial and parallel runs draw the
/// same numbers for each arc.
pub fn substream_seed(global_seed: u64, stream_id: &str) -> u64 {
    let mut s = global_seed ^ fnv1a64(stream_id.as_bytes()).wrapping_mul(GOLDEN_GAMMA);
    splitmix64(&mut s)
}

/// Uniform draws in `[0, 1)`.
#[derive(Debug, Clone)]
pub struct UniformStream {
    inner: Pcg64,
}

impl UniformStream {
    pub fn new(seed: u64) -> Self {
        let mut s = seed;
        let state = (u128::from(splitmix64(&mut s)) << 64) | u128::from(splitmix64(&mut s));
        let stream = (u128::from(splitmix64(&mut s)) << 64) | u128::from(splitmix64(&mut s));
        Self {
            inner: Pcg64::new(state, stream),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Integer in `[0, n)`; `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        // Lemire's multiply-shift; the bias is below 2^-40 for the small n used here.
        ((u128::from(self.inner.next_u64()) * u128::from(n)) >> 64) as u64
    }
}

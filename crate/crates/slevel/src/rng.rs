//! Reproducible scenario streams.
//!
//! Every stochastic component of a problem reads from its own counter-based
//! stream: a ChaCha8 generator keyed by the run seed, with the ChaCha stream
//! index set to the component index and the word position derived from the
//! scenario index. Reading scenario `k` therefore never depends on how many
//! scenarios were drawn before it, which makes batch means bit-reproducible
//! and lets evaluation code re-read any scenario range.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 32-bit words reserved per scenario index (one ChaCha block). A component
/// may consume at most `SCENARIO_STRIDE / 2` 64-bit draws per scenario.
pub const SCENARIO_STRIDE: u128 = 16;

/// Stream salts keep draws for different purposes statistically independent
/// even when they share a user-facing seed.
pub mod salt {
    /// Oracle optimization draws (one per outer iteration).
    pub const ORACLE: u64 = 0x4f_52_41_43;
    /// Metrics evaluation draws, never shared with optimization.
    pub const EVAL: u64 = 0x45_56_41_4c;
    /// Light-tail constant probing.
    pub const PROBE: u64 = 0x50_52_4f_42;
    /// Problem construction (sampled constraints, synthetic data).
    pub const BUILD: u64 = 0x42_55_49_4c;
    /// Initial-bound estimator rounds.
    pub const ESTIMATE: u64 = 0x45_53_54_49;
}

/// One SplitMix64 step. Used only for seed derivation, never for scenario
/// draws themselves.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent sub-seed from a seed and a salt.
pub fn mix(seed: u64, salt: u64) -> u64 {
    splitmix64(seed ^ splitmix64(salt))
}

/// Derive an independent sub-seed from a seed, a salt, and an index
/// (outer iteration, estimator round, ...).
pub fn mix3(seed: u64, salt: u64, index: u64) -> u64 {
    splitmix64(mix(seed, salt) ^ splitmix64(index.wrapping_add(0x9E37)))
}

/// A component's scenario stream with random access by scenario index.
pub struct ScenarioStream {
    rng: ChaCha8Rng,
}

impl ScenarioStream {
    pub fn new(seed: u64, component: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(component as u64);
        Self { rng }
    }

    /// Position the generator at the start of scenario `index` and hand it out.
    pub fn scenario(&mut self, index: u64) -> &mut ChaCha8Rng {
        self.rng.set_word_pos(u128::from(index) * SCENARIO_STRIDE);
        &mut self.rng
    }
}

/// Uniform integer in `[0, n)` from exactly one 64-bit draw (widening
/// multiply; no rejection loop, so word consumption is fixed). The modulo
/// bias is below `n / 2^64`, irrelevant at dataset scale.
pub fn index_below(rng: &mut impl RngCore, n: usize) -> usize {
    debug_assert!(n > 0);
    ((u128::from(rng.next_u64()) * n as u128) >> 64) as usize
}

/// Uniform draw in `[lo, hi)` from exactly one 64-bit draw.
pub fn uniform(rng: &mut impl RngCore, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit(rng)
}

/// Uniform draw in `[0, 1)` from exactly one 64-bit draw.
pub fn unit(rng: &mut impl RngCore) -> f64 {
    // 53 random mantissa bits, the standard open-right construction.
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

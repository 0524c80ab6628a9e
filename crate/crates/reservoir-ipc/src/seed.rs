//! Counter-based derivation of per-trial random streams.
//!
//! Every consumer of randomness receives a `ChaCha8Rng` keyed by a base seed
//! plus a tuple of context words (data length, trial index, role). Streams are
//! therefore independent of scheduling order: any trial can be recomputed in
//! isolation and two distinct context tuples never share a stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream roles, used as the last context word so the same trial can own
/// several independent generators.
pub mod role {
    /// Input process of a trial.
    pub const INPUT: u64 = 1;
    /// Reservoir weight draws of a trial.
    pub const RESERVOIR: u64 = 2;
    /// Reservoir draw shared by all trials when the reservoir is fixed.
    pub const FIXED_RESERVOIR: u64 = 3;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a deterministic generator from `base` and a context tuple.
///
/// The 256-bit ChaCha key is produced by a splitmix64 chain over the base
/// seed and the context words, so nearby tuples map to unrelated keys.
pub fn derive_rng(base: u64, context: &[u64]) -> ChaCha8Rng {
    let mut state = base ^ 0x6a09_e667_f3bc_c908;
    let mut fold = splitmix64(&mut state);
    for &word in context {
        state ^= word.wrapping_mul(0x2545_f491_4f6c_dd1d);
        fold ^= splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state ^= fold;
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

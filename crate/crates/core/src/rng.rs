//! Seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator keyed by a 64-bit
//! seed and a 64-bit stream id. Datasets use one stream per point
//! (`stream = index`), so extending `n` leaves the earlier points unchanged.
//! Experiment trials derive their seed from `(base_seed, cell, trial)` with
//! [`trial_seed`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `H(base, cell, trial) = mix64(base ^ mix64(cell ^ mix64(trial)))`.
pub fn trial_seed(base_seed: u64, cell: u64, trial: u64) -> u64 {
    mix64(base_seed ^ mix64(cell ^ mix64(trial)))
}

/// Derives an independent seed for a named purpose inside one trial.
pub fn derive(seed: u64, purpose: u64) -> u64 {
    mix64(seed ^ mix64(purpose.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

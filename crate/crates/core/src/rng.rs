//! Per-trial random number generators derived from a master seed.
//!
//! Trial `t` of a run seeded with `master` draws from a generator seeded
//! with [`derive_seed`]`(master, t)`, so a trial's stream depends only on the
//! pair and never on scheduling.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type TrialRng = Xoshiro256PlusPlus;

/// The splitmix64 finalizer.
#[inline]
pub fn mix_seed(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for `trial` under `master`.
///
/// Computed as `mix(mix(master) + golden * (trial + 1))`, with the golden
/// ratio increment of splitmix64.
#[inline]
pub fn derive_seed(master: u64, trial: u64) -> u64 {
    const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
    mix_seed(mix_seed(master).wrapping_add(GOLDEN.wrapping_mul(trial.wrapping_add(1))))
}

pub fn trial_rng(master: u64, trial: u64) -> TrialRng {
    Xoshiro256PlusPlus::seed_from_u64(derive_seed(master, trial))
}

/// A generator for a named sub-stream of a trial, e.g. a second independent
/// draw that must not disturb the main stream.
pub fn substream_rng(master: u64, trial: u64, stream: u64) -> TrialRng {
    Xoshiro256PlusPlus::seed_from_u64(derive_seed(derive_seed(master, trial), stream))
}

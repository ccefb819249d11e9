// SPDX-License-Identifier: Apache-2.0

//! Counter-based seed derivation.
//!
//! Every random stream in an experiment is keyed by a path of integers
//! `(master, replication, agent, phase, ...)`. Each component is folded in
//! with a SplitMix64 finalizer, so a derived seed depends only on its own
//! path. Adding replications or agents never changes the seeds of existing
//! ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named phases used when deriving per-purpose seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Phase {
    Init = 1,
    Shuffle = 2,
    TrainData = 3,
    Prediction = 4,
    Boost = 5,
    MonteCarlo = 6,
    Rademacher = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` and a path of counters.
pub fn derive(parent: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(parent), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

/// Seed for `(replication, agent, phase)` under a master seed.
pub fn agent_seed(master: u64, replication: u64, agent: u64, phase: Phase) -> u64 {
    derive(master, &[replication, agent, phase as u64])
}

/// Deterministic RNG used throughout the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

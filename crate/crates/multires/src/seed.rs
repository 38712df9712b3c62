//! Deterministic seeding for replicated experiments.
//!
//! Every replication draws from its own ChaCha12 stream, keyed by a
//! child seed derived from the experiment's master seed and the
//! replication index. The derivation is one step of the SplitMix64
//! sequence seeded at the master seed: index i maps to the (i+1)-th
//! stream element, i.e. the SplitMix64 finalizer applied to
//! `master + (i+1) * GOLDEN`. The finalizer is bijective and strongly
//! mixing, so child seeds are decorrelated even for adjacent indices,
//! and any single replication can be reproduced in isolation without
//! generating its predecessors.

use rand_chacha::ChaCha12Rng;
use rand_chacha::rand_core::SeedableRng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer; a bijection on u64.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for replication `index` of a master-seeded experiment.
pub fn child_seed(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Fresh generator for replication `index`.
pub fn replication_rng(master: u64, index: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(child_seed(master, index))
}

/// Generator keyed directly by a single seed, for one-off sampling.
pub fn direct_rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

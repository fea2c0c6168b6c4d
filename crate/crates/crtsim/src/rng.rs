//! Deterministic seed derivation.
//!
//! Replicate RNG streams are derived as hash(master_seed, cell, replicate) so
//! results do not depend on thread scheduling: any worker that picks up
//! replicate `r` of cell `c` reconstructs the same stream.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

/// RNG used throughout the simulator.
pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer; good dispersion for consecutive integers.
fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix two words into one seed.
pub fn mix(a: u64, b: u64) -> u64 {
    splitmix64(a ^ splitmix64(b))
}

/// Seed for one replicate of one grid cell.
pub fn derive_seed(master_seed: u64, cell: u64, replicate: u64) -> u64 {
    mix(mix(master_seed, cell), replicate)
}

/// RNG seeded from a single word.
pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// RNG for one replicate of one grid cell.
pub fn replicate_rng(master_seed: u64, cell: u64, replicate: u64) -> SimRng {
    seeded(derive_seed(master_seed, cell, replicate))
}

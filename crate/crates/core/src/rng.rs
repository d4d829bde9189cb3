//! Seeded random streams.
//!
//! Every stochastic component takes an explicit [`SimRng`]. Streams for
//! replications and policies are derived from a master seed by hashing, so a
//! cell's stream does not depend on the order in which cells are executed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Purpose tags mixed into derived seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Environment = 1,
    Serving = 2,
    Policy = 3,
    Logger = 4,
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replication `rep` derived from `master`.
pub fn replication_seed(master: u64, rep: usize) -> u64 {
    mix(mix(master) ^ (rep as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Seed of a named stream inside one replication.
pub fn stream_seed(replication_seed: u64, stream: Stream, salt: u64) -> u64 {
    mix(replication_seed ^ mix(((stream as u64) << 32) ^ salt))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

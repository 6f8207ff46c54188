//! Deterministic seed derivation.
//!
//! Every randomized trial gets its own generator seeded from
//! `(master, stream, index)`, so results do not depend on how trials are
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags keep independent uses of the same trial index decorrelated.
pub mod stream {
    pub const COVER: u64 = 0x636f_7665;
    pub const SECRET: u64 = 0x7365_6372;
    pub const ORDER: u64 = 0x6f72_6465;
    pub const CODEBOOK: u64 = 0x636f_6465;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index)
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn trial_rng(master: u64, stream: u64, index: u64) -> Rng {
    rng(derive(master, stream, index))
}

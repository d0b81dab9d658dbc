//! Keyed random streams.
//!
//! Every random draw in the library comes from a ChaCha8 stream identified by
//! a master seed, a domain tag and two indices. Two streams with different
//! keys never share draws, so work can be reordered or parallelised without
//! changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Domain tags so that, e.g., GA children and simulation replicates drawn
/// from the same master seed do not collide.
pub mod tag {
    pub const GA_CHILD: u64 = 1;
    pub const INIT: u64 = 2;
    pub const CASE_DATA: u64 = 3;
    pub const SMS_NULL: u64 = 4;
    pub const MARKOV_SIM: u64 = 5;
    pub const SCHEMA_REPLAY: u64 = 6;
    pub const GA_SEED: u64 = 7;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Stream keyed by `(seed, tag, a, b)`. `a` and `b` must each fit in 32 bits
/// to stay collision free; larger values are folded into the seed.
pub fn stream(seed: u64, tag: u64, a: u64, b: u64) -> StreamRng {
    let folded = splitmix64(seed ^ splitmix64(tag) ^ splitmix64((a >> 32) ^ ((b >> 32) << 16)));
    let mut rng = ChaCha8Rng::seed_from_u64(folded);
    rng.set_stream(((a & 0xFFFF_FFFF) << 32) | (b & 0xFFFF_FFFF));
    rng
}

/// Derive a child seed, e.g. the GA seed of replicate `r` of case `c`.
pub fn derive_seed(seed: u64, tag: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(tag)) ^ splitmix64(a.rotate_left(32) ^ b))
}

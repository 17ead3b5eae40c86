//! Seeded random substreams.
//!
//! A substream is a ChaCha8 generator seeded with
//! `splitmix64(seed ^ splitmix64(index + 1))`, so parallel work can be
//! scheduled in any order and still reproduce.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Human-readable description of the substream hash, echoed into manifests.
pub const SUBSTREAM_HASH: &str = "chacha8(splitmix64(seed ^ splitmix64(index + 1)))";

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn substream(seed: u64, index: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(index.wrapping_add(1))))
}

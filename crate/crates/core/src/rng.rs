//! Keyed random streams.
//!
//! Every random draw in the simulator comes from a ChaCha stream whose seed
//! is derived from the run seed and a fixed tuple of tags (stage, segment,
//! group, ...). Results therefore never depend on evaluation order or on the
//! number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stage tags, kept distinct so streams never alias.
pub mod stream {
    pub const LSP: u64 = 1;
    pub const GENERATOR_PICK: u64 = 2;
    pub const CLUSTER_PARAMS: u64 = 3;
    pub const FOCAL_RETRY: u64 = 4;
    pub const SCATTERERS: u64 = 5;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random stream for `seed` and a tag path.
pub fn keyed(seed: u64, tags: &[u64]) -> StreamRng {
    let mut state = splitmix64(seed);
    for &t in tags {
        state = splitmix64(state ^ splitmix64(t.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    ChaCha8Rng::seed_from_u64(state)
}

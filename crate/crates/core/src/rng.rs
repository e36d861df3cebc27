//! Seed derivation for independent, reproducible random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mixes a base seed with a path of stream indices (volume, frame, column,
/// repeat, ...) into a new seed. Distinct paths give statistically
/// independent streams; the same path always gives the same stream.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut state = splitmix(base ^ 0x5eed_0c7a_11ce_5eed);
    for &p in path {
        state = splitmix(state ^ splitmix(p.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    state
}

/// A ChaCha8 generator seeded from `derive_seed(base, path)`.
pub fn stream(base: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, path))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

//! Seeded random streams.
//!
//! Every consumer derives an independent ChaCha stream from the user seed
//! and a small tuple of indices, so results do not depend on the order in
//! which parallel work finishes.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type Stream = ChaCha12Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for `seed` and a path of indices, e.g. `derive(seed, &[PURPOSE, i])`.
pub fn derive(seed: u64, path: &[u64]) -> Stream {
    let mut key = [0u8; 32];
    let mut h = splitmix(seed);
    for &p in path {
        h = splitmix(h ^ splitmix(p.wrapping_add(0x5851_F42D_4C95_7F2D)));
    }
    for (i, chunk) in key.chunks_mut(8).enumerate() {
        h = splitmix(h.wrapping_add(i as u64));
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

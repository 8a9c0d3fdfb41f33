//! Counter-based random streams.
//!
//! Every independent task (a Monte Carlo sample, a bootstrap replicate) gets
//! its own generator keyed by the master seed and a path of counters, so the
//! draws do not depend on scheduling or on how many tasks run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags, one per consumer.
pub mod tag {
    pub const DATA: u64 = 0x6461_7461;
    pub const BOOTSTRAP: u64 = 0x626f_6f74;
    pub const GRID: u64 = 0x6772_6964;
    pub const REPLICATE: u64 = 0x7265_706c;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a 64-bit subseed from `seed` and a counter path.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix(seed), |acc, &p| splitmix(acc ^ splitmix(p)))
}

/// Generator for the stream identified by `seed` and `path`.
pub fn stream_rng(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut s = derive_seed(seed, path);
    for chunk in key.chunks_exact_mut(8) {
        s = splitmix(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

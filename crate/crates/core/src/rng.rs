//! Counter-based random streams.
//!
//! Every draw is addressed by `(seed, trial, index)`, so results do not depend
//! on how trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for one `(seed, trial, index)` address.
pub fn stream(seed: u64, trial: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let words = [
        splitmix(seed),
        splitmix(seed ^ 0x5851_f42d_4c95_7f2d),
        splitmix(trial),
        splitmix(trial.wrapping_add(seed.rotate_left(17))),
    ];
    for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Two independent standard normals at one address.
pub fn normal_pair(seed: u64, trial: u64, index: u64) -> (f64, f64) {
    let mut rng = stream(seed, trial, index);
    (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
}

//! Deterministic random streams.
//!
//! Every random draw in the engine is keyed by `(seed, domain, a, b)` so
//! that training runs are reproducible across processes and thread counts.
//! Long-lived streams (parameter init, pixel sampling) use ChaCha8; one-off
//! jitters in hot loops use a splitmix64 counter hash directly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Each randomized subsystem owns one constant so streams
/// never collide.
pub mod domain {
    pub const INIT_FG_COLOR: u64 = 1;
    pub const INIT_BG_COLOR: u64 = 2;
    pub const INIT_MLP_VI: u64 = 3;
    pub const INIT_MLP_VD: u64 = 4;
    pub const PIXEL_SAMPLES: u64 = 5;
    pub const RAY_JITTER: u64 = 6;
    pub const OCC_JITTER: u64 = 7;
    pub const LIDAR_DROPOUT: u64 = 8;
}

/// splitmix64 finalizer.
#[inline]
pub fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

#[inline]
fn key(seed: u64, domain: u64, a: u64, b: u64) -> u64 {
    mix(mix(mix(mix(seed) ^ domain) ^ a) ^ b)
}

/// A seeded ChaCha8 stream for the given key tuple.
pub fn stream(seed: u64, domain: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut state = key(seed, domain, a, b);
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        state = mix(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

/// One uniform draw in `[0, 1)` from the counter hash. Cheap enough for
/// per-sample jitter inside the march loops.
#[inline]
pub fn unit_f64(seed: u64, domain: u64, a: u64, b: u64) -> f64 {
    (key(seed, domain, a, b) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

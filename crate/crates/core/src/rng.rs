//! Deterministic random-stream derivation.
//!
//! Every stochastic code path draws from a `ChaCha8` stream keyed by
//! `(root seed, domain tag, index...)`. Streams for different domains or
//! indices never overlap, which makes per-user / per-trial / per-resample
//! work order-independent: a parallel and a serial run consume identical
//! randomness.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags. One per independent consumer of randomness.
pub mod tag {
    pub const SPLIT: u64 = 0x01;
    pub const GRID_ASSIGN: u64 = 0x02;
    pub const POPULATION: u64 = 0x03;
    pub const OUTCOME: u64 = 0x04;
    pub const ORACLE: u64 = 0x05;
    pub const COLSAMPLE: u64 = 0x06;
    pub const BOOTSTRAP: u64 = 0x07;
    pub const TRIAL: u64 = 0x08;
    pub const HISTORY: u64 = 0x09;
    pub const VALIDATION_FOLD: u64 = 0x0a;
    pub const CROSSFIT: u64 = 0x0b;
    pub const META_FIT: u64 = 0x0c;
    pub const SAMPLE: u64 = 0x0d;
}

/// SplitMix64 finalizer; a bijection on `u64`.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Collapse key parts into a 256-bit ChaCha seed by xor-absorb + mix.
fn derive_key(parts: &[u64]) -> [u8; 32] {
    let mut state: u64 = 0x243F_6A88_85A3_08D3; // pi digits, nothing up the sleeve
    for &p in parts {
        state = mix(state ^ p).wrapping_add(0x9E37_79B9_7F4A_7C15);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        chunk.copy_from_slice(&mix(state).to_le_bytes());
    }
    key
}

/// Stream keyed by `(seed, tag)`.
pub fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_key(&[seed, tag]))
}

/// Stream keyed by `(seed, tag, index)`.
pub fn stream_at(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_key(&[seed, tag, index]))
}

/// Stream keyed by `(seed, tag, index, lane)`, for consumers that need
/// several independent streams per index.
pub fn stream_lane(seed: u64, tag: u64, index: u64, lane: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_key(&[seed, tag, index, lane]))
}

/// Derived 64-bit seed for a child component that keys its own streams.
pub fn child_seed(seed: u64, tag: u64, index: u64) -> u64 {
    mix(mix(seed ^ mix(tag)) ^ index)
}

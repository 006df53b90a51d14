//! Seeded random sources.
//!
//! All randomness is derived from a single 64-bit master seed. A worker that
//! handles trial `index` of stream `stream` seeds its own generator with
//! [`derive_seed`], so results never depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-trial seed: `mix(mix(master ^ mix(stream)) ^ index)`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    mix(mix(master ^ mix(stream)) ^ index)
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Hash a small list of integers into a stream tag, used to give every
/// `(t, s, purpose)` coordinate its own stream.
pub fn stream_tag(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243f_6a88_85a3_08d3, |acc, &p| mix(acc ^ p.wrapping_mul(0x2545_f491_4f6c_dd1d)))
}

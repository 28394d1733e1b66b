//! Seed derivation. Every random quantity is drawn from a ChaCha stream keyed
//! by (seed, purpose tag, index), so parallel trials never share state and
//! results do not depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// FNV-1a, used only to turn purpose tags into stable integers.
fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed for `(seed, purpose, index)`.
pub fn derive_seed(seed: u64, purpose: &str, index: u64) -> u64 {
    mix(mix(seed ^ fnv1a(purpose)).wrapping_add(mix(index)))
}

/// A generator for `(seed, purpose)`; `index` selects the ChaCha stream.
pub fn stream(seed: u64, purpose: &str, index: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(mix(seed ^ fnv1a(purpose)));
    rng.set_stream(index);
    rng
}

//! Named random streams derived from a single master seed.
//!
//! Every source of randomness in the pipeline asks for a seed by name
//! (`"fold-3"`, `"S9"`, `"param/lstm.w_x"`), so adding a new consumer never
//! shifts the values another consumer sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a. Stable across platforms and releases, unlike `DefaultHasher`.
pub fn stream_hash(name: &str) -> u64 {
    name.bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `master ⊕ hash(name)`, whitened.
pub fn derive(master: u64, name: &str) -> u64 {
    splitmix64(master ^ stream_hash(name))
}

pub fn rng(master: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, name))
}

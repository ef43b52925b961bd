//! Seed plumbing. Every stochastic stage derives its generator from one root
//! seed and a stage name, so adding a stage never perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StageRng = ChaCha8Rng;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}

/// SplitMix64 finalizer; a bijective scrambler for 64-bit seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn seeded(seed: u64) -> StageRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for a named substream of `root`.
pub fn substream_seed(root: u64, stage: &str) -> u64 {
    splitmix64(root ^ fnv1a64(stage.as_bytes()))
}

pub fn substream(root: u64, stage: &str) -> StageRng {
    seeded(substream_seed(root, stage))
}

/// Seed for item `index` of keyed work (e.g. walk `index` from node `key`).
pub fn keyed_seed(root: u64, key: u64, index: u64) -> u64 {
    splitmix64(splitmix64(root ^ splitmix64(key)) ^ index)
}

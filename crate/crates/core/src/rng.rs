//! Seeded randomness.
//!
//! Every stochastic routine takes an explicit `u64` seed and builds its own
//! ChaCha8 stream (a counter-based generator), so results do not depend on
//! thread scheduling or call order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Seed for the `index`-th independent sub-stream of `seed`.
pub fn derive(seed: u64, index: u64) -> u64 {
    seed ^ fnv1a(&index.to_le_bytes())
}

/// Seed for a named sub-stream, e.g. `"Social|Molecular|0.1|0.9|nt"`.
pub fn derive_str(seed: u64, key: &str) -> u64 {
    seed ^ fnv1a(key.as_bytes())
}

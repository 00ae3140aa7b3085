//! Seeded random streams.
//!
//! Every consumer draws from its own ChaCha8 stream, keyed by the run seed and
//! selected by a (domain, index) pair, so results never depend on the order in
//! which independent draws are made.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use rand_chacha::ChaCha8Rng as StreamRng;

pub const DIRECTIONS: u64 = 1;
pub const PERTURBATIONS: u64 = 2;
pub const DATA: u64 = 3;
pub const GD_INIT: u64 = 4;
pub const SHUFFLE: u64 = 5;
pub const INSTANCES: u64 = 6;
pub const SPLIT: u64 = 7;

const INDEX_BITS: u32 = 48;

/// Independent stream `index` of `domain` under `seed`.
pub fn substream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    assert!(index < 1 << INDEX_BITS, "substream index out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << INDEX_BITS) | index);
    rng
}

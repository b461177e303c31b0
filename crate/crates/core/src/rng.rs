//! Seeding.
//!
//! Every stochastic routine takes an explicit `u64` seed. Independent
//! streams (replicates, flow steps, bootstrap resampling) are derived with
//! [`derive_seed`], a counter-based hash of `(master, stream)`: the SplitMix64
//! finalizer applied to `master + (stream + 1) * γ` with γ the 64-bit golden
//! ratio constant, then mixed once more with the master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// Named stream offsets so that different consumers of one master seed
/// never collide.
pub mod stream {
    pub const DIRECTIONS: u64 = 0x0100_0000;
    pub const REPLICATE: u64 = 0x0200_0000;
    pub const BOOTSTRAP: u64 = 0x0300_0000;
    pub const FLOW_STEP: u64 = 0x0400_0000;
    pub const KMEANS: u64 = 0x0500_0000;
    pub const JITTER: u64 = 0x0600_0000;
    pub const RESAMPLE: u64 = 0x0700_0000;
    pub const REFERENCE: u64 = 0x0800_0000;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of stream `stream` under `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let z = master.wrapping_add(stream.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    splitmix64(splitmix64(z) ^ master.rotate_left(17))
}

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

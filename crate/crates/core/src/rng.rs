//! Splittable seed streams.
//!
//! Every random consumer in the crate takes a [`SeedStream`] and derives an
//! independent child for each unit of work (a tree, a grid cell, a
//! repetition). Children are keyed, not drawn, so results do not depend on
//! the order in which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random generator used throughout the crate.
pub type Rng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeedStream {
    seed: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream keyed by `key`. Distinct keys give statistically
    /// independent streams; the same key always gives the same stream.
    pub fn child(&self, key: u64) -> Self {
        let mixed = splitmix64(self.seed ^ splitmix64(key.wrapping_add(0x6a09_e667_f3bc_c908)));
        Self {
            seed: splitmix64(mixed),
        }
    }

    pub fn rng(&self) -> Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

//! Counter-based random streams.
//!
//! Every unit of parallel work is keyed by a [`RandomStream`]; the ChaCha
//! stream id carries the index, so outputs do not depend on how many worker
//! threads execute the work.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Rows (or trials) handled by one leaf stream when work is partitioned.
pub const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomStream {
    pub root_seed: u64,
    pub stream_index: u64,
}

impl RandomStream {
    pub fn new(root_seed: u64, stream_index: u64) -> Self {
        Self {
            root_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.root_seed);
        rng.set_stream(self.stream_index);
        rng
    }

    /// Derived stream for sub-task `k`. The same `(self, k)` always yields the
    /// same child; different `k` give different ChaCha stream ids.
    pub fn child(&self, k: u64) -> RandomStream {
        let mixed = splitmix64(splitmix64(self.stream_index) ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        RandomStream {
            root_seed: self.root_seed,
            stream_index: mixed,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Number of `CHUNK`-sized pieces needed to cover `count` items.
pub fn chunk_count(count: usize) -> usize {
    count.div_ceil(CHUNK)
}

//! Reproducible random streams.
//!
//! Every consumer of randomness asks for a child stream keyed by
//! `(seed, tag, index)`. Streams never depend on scheduling, so parallel and
//! sequential executions draw identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator type handed out by [`Streams`].
pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent generator for `(tag, index)`.
    pub fn child(&self, tag: &str, index: u64) -> StreamRng {
        ChaCha8Rng::seed_from_u64(self.key(tag, index))
    }

    /// Sub-stream family derived from this one, for nesting (e.g. one family
    /// per optimizer phase).
    pub fn fork(&self, tag: &str, index: u64) -> Streams {
        Streams { seed: self.key(tag, index) }
    }

    fn key(&self, tag: &str, index: u64) -> u64 {
        let mut h = splitmix(self.seed ^ 0x6a09_e667_f3bc_c908);
        h = splitmix(h ^ fnv1a(tag.as_bytes()));
        splitmix(h ^ index)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

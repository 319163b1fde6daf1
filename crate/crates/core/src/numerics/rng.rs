use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Name of the generator behind every [`RngStream`].
pub const GENERATOR: &str = "ChaCha8";

/// Seed material for one independent random stream.
///
/// The key comes from `seed`, the 64-bit ChaCha stream id from `stream`, so
/// distinct `(seed, stream)` pairs give non-overlapping sequences and the
/// draws never depend on thread scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Child stream addressed by `(group, index)`; injective for both below 2³².
    pub fn child(seed: u64, group: u32, index: u32) -> Self {
        Self {
            seed,
            stream: (u64::from(group) << 32) | u64::from(index),
        }
    }

    pub fn generator(&self) -> &'static str {
        GENERATOR
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

//! Seeded, per-stream random number generation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// A `(seed, stream_id)` pair. Identical pairs reproduce identical sequences;
/// distinct stream ids give independent sequences under the same seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub const fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> SimRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `base ^ hash(indices)`. Seeds for one grid point never depend on how many
/// other points the grid contains.
pub fn derive_seed(base: u64, indices: &[u64]) -> u64 {
    let h = indices
        .iter()
        .fold(0x5851_F42D_4C95_7F2D_u64, |acc, &i| splitmix64(acc ^ splitmix64(i)));
    base ^ h
}

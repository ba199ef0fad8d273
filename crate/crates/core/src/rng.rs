//! Explicit, splittable random streams.
//!
//! Every sampling routine takes its generator as an argument. Independent
//! streams are carved out of a single seed with ChaCha's 64-bit stream id, so
//! trajectory `i` of a data set always sees the same numbers regardless of how
//! many other trajectories were drawn before it.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub use rand_chacha::ChaCha20Rng as SimRng;

/// Purpose tags used to separate streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    TrainControls = 1,
    TestControls = 2,
    ObservationNoise = 3,
    Grids = 4,
    Reservoir = 5,
    Esn = 6,
    Misc = 7,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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

    /// Generator for item `index` of stream `purpose`.
    pub fn rng(&self, purpose: Stream, index: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(((purpose as u64) << 48) ^ index);
        rng
    }

    /// A child seed that is statistically unrelated to the parent.
    pub fn derive(&self, tag: u64) -> SeedStream {
        SeedStream::new(splitmix64(self.seed ^ splitmix64(tag)))
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

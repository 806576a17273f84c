use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Master seed for a computation. Every consumer derives its own stream from
/// `(seed, purpose, index)`, so results do not depend on thread scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

/// Stream labels, kept distinct so that e.g. bootstrap replicate 3 and
/// posterior draw 3 never share randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Optimizer = 1,
    Posterior = 2,
    Bootstrap = 3,
    Simulation = 4,
    Jitter = 5,
}

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent generator for `(purpose, index)`.
    pub fn stream(self, purpose: Stream, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.0 ^ splitmix64(purpose as u64)));
        rng.set_stream(index);
        rng
    }

    /// A child seed, for handing to a nested computation that derives its own streams.
    pub fn child(self, purpose: Stream, index: u64) -> RngSeed {
        RngSeed(splitmix64(
            splitmix64(self.0 ^ splitmix64(purpose as u64)).wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        ))
    }
}

impl From<u64> for RngSeed {
    fn from(s: u64) -> Self {
        RngSeed(s)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

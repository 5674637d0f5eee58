//! Reproducible random streams.
//!
//! Every random quantity derives from one user seed. Components draw from
//! distinct ChaCha streams selected by a fixed stream id, so adding draws in
//! one component never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named substreams of a seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Simulation,
    Sampler,
    SphereQuadrature,
    NullSimulation,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Simulation => 1,
            Stream::Sampler => 2,
            Stream::SphereQuadrature => 3,
            Stream::NullSimulation => 4,
        }
    }
}

/// Generator for `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// Derives the seed of replicate `index` from a base seed (SplitMix64 mixing).
pub fn replicate_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

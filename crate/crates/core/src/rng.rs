//! Seeded random streams.
//!
//! A run owns one base seed. Every component draws from its own ChaCha
//! stream derived from that seed, so changing how many numbers one
//! component consumes never shifts the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type Rng = ChaCha8Rng;

/// Stream identifiers of the components of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stream {
    Doe = 1,
    TrainingStarts = 2,
    AcquisitionWarmup = 3,
    Fallback = 4,
    Warp = 5,
    Instance = 6,
    RandomSearch = 7,
    Experiment = 8,
}

impl Stream {
    pub const ALL: [Stream; 8] = [
        Stream::Doe,
        Stream::TrainingStarts,
        Stream::AcquisitionWarmup,
        Stream::Fallback,
        Stream::Warp,
        Stream::Instance,
        Stream::RandomSearch,
        Stream::Experiment,
    ];

    pub fn id(self) -> u64 {
        self as u64
    }
}

pub fn stream(seed: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// A generator for an arbitrary numbered sub-stream, used where one
/// component needs many independent generators (e.g. one per instance).
pub fn substream(seed: u64, id: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Draws a fresh seed for a nested computation.
pub fn child_seed(rng: &mut Rng) -> u64 {
    use rand::RngCore;
    rng.next_u64()
}

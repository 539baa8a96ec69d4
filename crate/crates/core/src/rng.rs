//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream derived from one
//! root seed and a fixed label, so adding draws in one place never shifts the
//! sequence seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Shuffle = 2,
    Sampler = 3,
    Demix = 4,
    Stats = 5,
    Synthetic = 6,
    Diagnostics = 7,
}

pub fn stream(seed: u64, label: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label as u64);
    rng
}

//! Seeded random streams.
//!
//! All randomness derives from one user seed. Each consumer draws from its own
//! ChaCha stream so that, for example, changing the number of trees leaves the
//! tie jitter untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Substream {
    TreeFit = 1,
    Jitter = 2,
    Sampling = 3,
    CvShuffle = 4,
    Scenario = 5,
    MonteCarlo = 6,
}

pub fn substream(seed: u64, stream: Substream) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

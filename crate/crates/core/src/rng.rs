//! Seeded random streams.
//!
//! Every replication derives its randomness from one `u64` seed. Each consumer
//! gets its own ChaCha8 stream (same key, distinct stream id), so changing how
//! one consumer draws never shifts the numbers another consumer sees. ChaCha8
//! is a counter-based generator with a fixed, documented output, which keeps
//! runs bit-identical across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams used by a replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Bernoulli arm conditions `r_k(t)`.
    Environment,
    /// Uniform choice of the player that gets to pull a contested arm.
    Collision,
    /// Randomness available to policies (tie-breaks, priors).
    Policy,
    /// Adversary coin flips (action deviation).
    Adversary,
    /// Collision stream for the information-hiding baseline.
    HidingCollision,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Environment => 1,
            Stream::Collision => 2,
            Stream::Policy => 3,
            Stream::Adversary => 4,
            Stream::HidingCollision => 5,
        }
    }
}

/// Returns the generator for `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

//! Seeded random streams.
//!
//! Every stochastic stage draws from its own ChaCha stream so that reusing the
//! same numeric seed for, say, a master surface and its replica error still
//! produces independent fields.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Stream {
    Surface = 1,
    ReplicaError = 2,
    Sensor = 3,
}

pub(crate) fn rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

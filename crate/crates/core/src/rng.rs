//! Seedable stream-indexed random number generation.
//!
//! Every stochastic component of the crate draws from a ChaCha12 generator
//! addressed by a `(seed, stream)` pair. Distinct streams of the same seed
//! never overlap, which is what makes sharded Monte Carlo runs and
//! independently seeded samplers reproducible and non-colliding.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

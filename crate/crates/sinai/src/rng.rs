//! Deterministic random number streams.
//!
//! Every stochastic routine in the crate draws from a ChaCha8 generator
//! keyed by a user seed, with independent substreams per replica so that
//! results are reproducible bit for bit regardless of how work is chunked.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for substream `stream` of the given seed. Distinct streams
/// are statistically independent.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

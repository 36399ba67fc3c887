//! Deterministic per-replication random streams.
//!
//! Replication `i` draws from ChaCha8 keyed by the master seed with stream
//! id `i`, so its numbers depend only on `(seed, i)` and never on which
//! thread runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Default master seed for every stochastic command.
pub const DEFAULT_SEED: u64 = 20_210_201;

pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

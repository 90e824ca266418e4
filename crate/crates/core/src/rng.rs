//! Deterministic per-stream random number generators.
//!
//! Every simulated unit of work (a time bin, a protocol round, a slice of a
//! scene) draws from its own ChaCha stream derived from `(seed, stream)`, so
//! results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

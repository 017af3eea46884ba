//! Counter-based random streams derived from one 64-bit seed.
//!
//! Stream `i` of seed `s` is the ChaCha8 keystream with key from `s` and
//! stream id `i`, so trial `i` draws the same numbers regardless of which
//! thread runs it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn stream(seed: u64, id: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Uniform points in `[lo, hi]^d`.
pub fn uniform_points(rng: &mut Rng, n: usize, d: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    use rand::Rng as _;
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(lo..=hi)).collect())
        .collect()
}

//! Deterministic seeded randomness. Every randomized operation in the crate
//! takes an explicit `u64` seed and derives a ChaCha8 stream from it, so runs
//! are reproducible bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Bernoulli(p) driven by an integer threshold on the raw 64-bit stream.
/// Avoids float rounding differences: identical seeds give identical graphs.
pub fn coin(rng: &mut Rng, p: f64) -> bool {
    use rand::RngCore;
    if p <= 0.0 {
        return false;
    }
    if p >= 1.0 {
        return true;
    }
    let threshold = (p * (u64::MAX as f64)) as u64;
    rng.next_u64() < threshold
}

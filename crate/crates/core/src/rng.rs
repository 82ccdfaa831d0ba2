//! Random streams.
//!
//! Every run owns one [`Rng`] seeded from a `u64`. Gaussian draws use the
//! ziggurat sampler from `rand_distr` and consume one draw per coordinate in
//! index order, so a stream is reproducible independently of how the caller
//! schedules work.

use rand::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

pub type Rng = rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Draws a fresh seed for a derived stream (dropout masks, probes).
pub fn child_seed(rng: &mut Rng) -> u64 {
    rng.next_u64()
}

pub fn fill_standard_normal(rng: &mut Rng, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

pub fn standard_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

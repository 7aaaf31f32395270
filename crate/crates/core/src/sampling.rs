//! Seeded sampling helpers shared by the hypothesis checks and cutoff certification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Name recorded alongside every seeded stream.
pub const GENERATOR_ID: &str = "chacha8/standard-normal-ziggurat";

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit_direction<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = crate::linalg::norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|c| c / n).collect();
        }
    }
}

/// Uniform sample from the closed ball of the given radius.
pub fn uniform_in_ball<R: Rng>(rng: &mut R, d: usize, radius: f64) -> Vec<f64> {
    let dir = unit_direction(rng, d);
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / d as f64);
    dir.into_iter().map(|c| c * r).collect()
}

/// Sample with radius uniform in `[inner, outer]` and uniform direction.
pub fn radial_in_shell<R: Rng>(rng: &mut R, d: usize, inner: f64, outer: f64) -> Vec<f64> {
    let dir = unit_direction(rng, d);
    let r = inner + (outer - inner) * rng.random::<f64>();
    dir.into_iter().map(|c| c * r).collect()
}

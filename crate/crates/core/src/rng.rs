//! Deterministic random-number streams.
//!
//! All stochastic generation in this crate derives from a `(seed, stream)`
//! pair so that per-sample work can run in parallel without changing any
//! output: each logical unit (a dataset sample, an epoch shuffle, a weight
//! matrix) draws from its own counter-addressed stream.

#[cfg_attr(feature = "std", allow(unused_imports))]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Well-known stream ids, kept in one place so independent sub-streams never
/// collide.
pub mod streams {
    /// Dataset samples occupy `[SAMPLE_BASE, SAMPLE_BASE + n)`.
    pub const SAMPLE_BASE: u64 = 1 << 32;
    pub const SPRING_COEFFICIENTS: u64 = 1;
    pub const CLASS_ASSIGNMENT: u64 = 2;
    pub const WEIGHT_INIT: u64 = 3;
    pub const SHUFFLE_BASE: u64 = 1 << 33;
    pub const DROPOUT_BASE: u64 = 1 << 34;
    pub const VISUALIZATION: u64 = 4;
}

/// A ChaCha stream addressed by `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard normal draw by the Box-Muller transform.
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Avoid ln(0) by shifting the open interval.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * core::f64::consts::PI * u2).cos()
}

//! Seeded randomness.
//!
//! All random fields come from SplitMix64: state `s` advances by the golden
//! gamma `0x9E3779B97F4A7C15` and each output is the finalizer
//! `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9; z = (z ^ (z >> 27)) * 0x94D049BB133111EB; z ^ (z >> 31)`
//! applied to the new state. Unit floats are `(x >> 11) * 2^-53`. Independent
//! streams are seeded with `seed ^ (stream * 0xD1B54A32D192ED03)`.

use rand_core::RngCore;
use rand_xoshiro::SplitMix64;
use rand_core::SeedableRng;

const STREAM_MULT: u64 = 0xD1B5_4A32_D192_ED03;

#[derive(Clone, Debug)]
pub struct SeededRng {
    inner: SplitMix64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng { inner: SplitMix64::seed_from_u64(seed) }
    }

    /// A generator for sub-stream `stream` of `seed`.
    pub fn stream(seed: u64, stream: u64) -> Self {
        SeededRng::new(seed ^ stream.wrapping_mul(STREAM_MULT))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Integer in `0..n` via the high word of `x · n`.
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Standard normal via Box–Muller (one variate per call).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }
}

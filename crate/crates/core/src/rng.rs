//! Reproducible random streams.
//!
//! A stream is identified by `(seed, stream_id)` and backed by ChaCha8, whose
//! native 64-bit stream selector gives independent sequences under one key.
//! Child streams are derived by mixing a label into the parent id, so every
//! consumer (worker, iteration, estimator draw) owns a sequence that does not
//! depend on execution order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self { seed, stream_id, inner }
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Independent child stream; depends only on `(seed, stream_id, label)`.
    pub fn derive(&self, label: u64) -> Self {
        let id = splitmix64(self.stream_id ^ splitmix64(label.wrapping_add(0xA076_1D64_78BD_642F)));
        Self::new(self.seed, id)
    }

    /// Child stream keyed by a label and an index (e.g. iteration, worker).
    pub fn derive2(&self, label: u64, index: u64) -> Self {
        self.derive(label).derive(index)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform index in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "empty range");
        self.inner.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Stream labels shared across the crate so coupled runs consume identical draws.
pub mod labels {
    pub const ITERATION: u64 = 1;
    pub const A_DRAW: u64 = 2;
    pub const Z_DRAW: u64 = 3;
    pub const AUX: u64 = 4;
    pub const OUTPUT_INDEX: u64 = 5;
    pub const LOGGING: u64 = 6;
    pub const WORKER: u64 = 7;
    pub const MASTER: u64 = 8;
    pub const INSTANCE: u64 = 9;
    pub const ROUNDING: u64 = 10;
    pub const START: u64 = 11;
}

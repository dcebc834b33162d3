//! Seeded random state.
//!
//! All generation draws from ChaCha8 (`rand_chacha`), a counter-based stream
//! cipher generator whose output is identical on every platform for a given
//! seed. Independent sub-streams are derived by hashing the parent seed with
//! a label, so adding a new consumer never perturbs existing ones.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Name recorded in manifests next to the seed.
pub const RNG_ALGORITHM: &str = "chacha8 (rand_chacha 0.9), sha256 label-derived sub-streams";

#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self { seed, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent stream for `label`.
    pub fn fork(&self, label: &str) -> Self {
        Self::new(derive_seed(self.seed, label))
    }

    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        self.inner.random_range(0..n)
    }

    /// Uniform integer in `lo..=hi`.
    pub fn range_inclusive(&mut self, lo: i64, hi: i64) -> i64 {
        self.inner.random_range(lo..=hi)
    }

    pub fn unit(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len() as u64) as usize]
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        // Fisher-Yates with our own index draws, so the permutation only
        // depends on the documented stream.
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}

/// `sha256(seed_le || label)` truncated to 64 bits.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

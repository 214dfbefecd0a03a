//! The pinned pseudo-random stream used for every draw in the engine.
//!
//! The generator is ChaCha8 (`rand_chacha`, whose output stream is value-stable
//! across releases). Seeds are expanded with SHA-256 and all bounded integer
//! and unit-interval conversions are implemented here rather than through
//! `rand`'s distributions, so a replayed seed produces the same sequence
//! regardless of which `rand` version is linked.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone)]
pub struct DrawRng {
    inner: ChaCha8Rng,
}

impl DrawRng {
    pub fn from_seed(seed: u64) -> Self {
        Self::derive(seed, "root", &[])
    }

    /// Independent stream keyed by a master seed, a purpose label and
    /// any number of integer coordinates (user hash, draw index, ...).
    pub fn derive(master_seed: u64, label: &str, parts: &[u64]) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"ganimals-rng-v1");
        hasher.update(master_seed.to_le_bytes());
        hasher.update((label.len() as u64).to_le_bytes());
        hasher.update(label.as_bytes());
        for part in parts {
            hasher.update(part.to_le_bytes());
        }
        let key: [u8; 32] = hasher.finalize().into();
        Self {
            inner: ChaCha8Rng::from_seed(key),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `[0, n)` by Lemire's multiply-and-reject.
    ///
    /// Panics if `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    pub fn index(&mut self, len: usize) -> usize {
        self.below(len as u64) as usize
    }

    /// Uniform real in `[0, 1)` with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    /// Approximately standard-normal draw (Irwin-Hall sum of twelve
    /// uniforms). Arithmetic only, so it is reproducible bit for bit.
    pub fn approx_normal(&mut self) -> f64 {
        (0..12).map(|_| self.unit()).sum::<f64>() - 6.0
    }
}

/// Stable 64-bit hash of a string, used for user-to-world assignment and
/// per-user stream derivation.
pub fn stable_hash64(label: &str, value: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(label.as_bytes());
    hasher.update([0u8]);
    hasher.update(value.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

//! Deterministic seed derivation.
//!
//! Every random stream in this crate is keyed by explicit 64-bit components
//! (master seed, trial index, ...) folded through splitmix64, so results are
//! identical across runs, platforms, and parallel schedules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds seed components into one value; order-sensitive.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut acc = 0x243F_6A88_85A3_08D3u64;
    for &p in parts {
        acc = mix64(acc ^ mix64(p));
    }
    acc
}

/// A ChaCha8 generator keyed by the given components.
pub fn stream(parts: &[u64]) -> ChaCha8Rng {
    let h = derive_seed(parts);
    let mut seed = [0u8; 32];
    for (i, chunk) in seed.chunks_exact_mut(8).enumerate() {
        chunk.copy_from_slice(&mix64(h ^ (i as u64 + 1)).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Minimal splitmix64 generator for unit tests.
#[cfg(test)]
pub(crate) struct TestRng(u64);

#[cfg(test)]
pub(crate) fn test_rng(seed: u64) -> TestRng {
    TestRng(mix64(seed))
}

#[cfg(test)]
impl TestRng {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        mix64(self.0)
    }

    pub fn next_bool(&mut self) -> bool {
        self.next_u64() & 1 == 1
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn next_range(&mut self, range: std::ops::RangeInclusive<usize>) -> usize {
        let (lo, hi) = (*range.start(), *range.end());
        lo + (self.next_u64() % (hi - lo + 1) as u64) as usize
    }
}

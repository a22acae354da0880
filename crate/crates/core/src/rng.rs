//! Seeded sampling.
//!
//! ChaCha8 seeded from a `u64` drives every random choice. Index selection
//! is done here with rejection sampling on raw `u64` draws instead of
//! `rand`'s range helpers, so a given seed picks the same items regardless of
//! `rand` version.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform integer in `0..bound`. `bound` must be positive.
    pub fn below(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "empty range");
        let bound = bound as u64;
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let draw = self.rng.next_u64();
            if draw < zone {
                return (draw % bound) as usize;
            }
        }
    }

    /// `k` distinct indices from `0..len` in draw order (partial Fisher-Yates).
    pub fn choose_indices(&mut self, len: usize, k: usize) -> Vec<usize> {
        assert!(k <= len, "cannot choose {k} of {len}");
        let mut pool: Vec<usize> = (0..len).collect();
        for i in 0..k {
            let j = i + self.below(len - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_choice() {
        let a = Sampler::new(7).choose_indices(50, 10);
        let b = Sampler::new(7).choose_indices(50, 10);
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 10);
    }

    #[test]
    fn full_choice_is_permutation() {
        let mut all = Sampler::new(1).choose_indices(20, 20);
        all.sort_unstable();
        assert_eq!(all, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn below_stays_in_range() {
        let mut s = Sampler::new(3);
        for bound in 1..100 {
            assert!(s.below(bound) < bound);
        }
    }
}

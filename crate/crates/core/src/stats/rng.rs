//! Seedable random streams.
//!
//! The generator is part of the output contract: a stream is ChaCha8 keyed
//! by four SplitMix64 outputs of `mix64(master_seed ^ mix64(stream_id + γ))`.
//! Shuffles, index sampling and bounded integers use only `next_u64`
//! (Fisher–Yates and Lemire's widening-multiply rejection), so permutations
//! are identical on every platform and pointer width.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut state = mix64(master_seed ^ mix64(stream_id.wrapping_add(GOLDEN_GAMMA)));
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            state = state.wrapping_add(GOLDEN_GAMMA);
            chunk.copy_from_slice(&mix64(state).to_le_bytes());
        }
        Self { master_seed, stream_id, inner: ChaCha8Rng::from_seed(key) }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Child stream, independent of this one and of its siblings.
    pub fn substream(&self, id: u64) -> Self {
        Self::new(self.master_seed, mix64(self.stream_id ^ mix64(id.wrapping_mul(GOLDEN_GAMMA))))
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Unbiased integer in `0..n`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let threshold = n.wrapping_neg() % n;
        loop {
            let wide = u128::from(self.inner.next_u64()) * u128::from(n);
            if (wide as u64) >= threshold {
                return (wide >> 64) as u64;
            }
        }
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.below(n as u64) as usize
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct indices from `0..n` in draw order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot sample {k} of {n} without replacement");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.index(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.standard_normal()
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::pearson;

    #[test]
    fn identical_seeds_reproduce() {
        let mut a = RngStream::new(42, 7);
        let mut b = RngStream::new(42, 7);
        let xs: Vec<u64> = (0..100).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..100).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
        let mut p1: Vec<u32> = (0..50).collect();
        let mut p2 = p1.clone();
        RngStream::new(1, 2).shuffle(&mut p1);
        RngStream::new(1, 2).shuffle(&mut p2);
        assert_eq!(p1, p2);
    }

    #[test]
    fn pinned_first_draws() {
        // Frozen output of the documented construction; a change here breaks
        // reproducibility of every permutation result.
        let mut s = RngStream::new(0, 0);
        assert_eq!(s.next_u64(), 0x7be5_ec07_39d9_00cb);
        assert_eq!(s.next_u64(), 0x301e_5ec4_3d80_fc8e);
        let mut p: Vec<u32> = (0..8).collect();
        RngStream::new(7, 1).shuffle(&mut p);
        assert_eq!(p, vec![7, 5, 1, 2, 6, 4, 0, 3]);
        assert_ne!(RngStream::new(0, 1).next_u64(), 0x7be5_ec07_39d9_00cb);
    }

    #[test]
    fn distinct_streams_uncorrelated() {
        let mut a = RngStream::new(99, 0);
        let mut b = RngStream::new(99, 1);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| a.uniform()).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.uniform()).collect();
        assert!(pearson(&xs, &ys).unwrap().abs() < 0.05);
        let mut c = a.substream(3);
        let zs: Vec<f64> = (0..n).map(|_| c.uniform()).collect();
        assert!(pearson(&xs, &zs).unwrap().abs() < 0.05);
    }

    #[test]
    fn below_is_in_range_and_covers() {
        let mut s = RngStream::new(5, 5);
        let mut seen = [false; 7];
        for _ in 0..1000 {
            let v = s.below(7) as usize;
            seen[v] = true;
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn sample_indices_distinct() {
        let mut s = RngStream::new(3, 3);
        let mut idx = s.sample_indices(20, 10);
        assert_eq!(idx.len(), 10);
        idx.sort();
        idx.dedup();
        assert_eq!(idx.len(), 10);
        assert!(idx.iter().all(|&i| i < 20));
    }
}

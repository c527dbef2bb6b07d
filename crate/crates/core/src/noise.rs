//! Deterministic, refinable Brownian increments.
//!
//! Increments live on a dyadic tree over a base step `h₀`. The level-0 increment over
//! `[k h₀, (k+1) h₀]` is `N(0, h₀)`; each node at level `l` splits into two children by a
//! Brownian bridge draw, so the sum of the children equals the parent and every level is
//! a sample of the same path. Every node draws from its own ChaCha8 key built from
//! `(seed, stream, level, index)`, which makes any increment addressable without replaying
//! the stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const ROOT_TAG: u64 = u64::MAX;

#[derive(Clone, Debug)]
struct Block {
    root: u64,
    /// `levels[l]` holds `2^l · width` increments.
    levels: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct NoiseStream {
    seed: u64,
    stream_id: u64,
    width: usize,
    base_dt: f64,
    cache_level: u32,
    zero: bool,
    block: Option<Block>,
}

impl NoiseStream {
    /// `width` is the number of scalar Brownian motions (N·d).
    pub fn new(seed: u64, stream_id: u64, width: usize, base_dt: f64) -> Self {
        Self { seed, stream_id, width, base_dt, cache_level: 0, zero: false, block: None }
    }

    /// Stream that returns identically zero increments.
    pub fn zero(width: usize, base_dt: f64) -> Self {
        Self { zero: true, ..Self::new(0, 0, width, base_dt) }
    }

    /// Level whose increments are cached a whole base interval at a time.
    pub fn with_cache_level(mut self, level: u32) -> Self {
        self.cache_level = level;
        self.block = None;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn base_dt(&self) -> f64 {
        self.base_dt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn step_at(&self, level: u32) -> f64 {
        self.base_dt / 2f64.powi(level as i32)
    }

    fn normals(&self, level: u64, index: u64, out: &mut [f64]) {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.stream_id.to_le_bytes());
        key[16..24].copy_from_slice(&level.to_le_bytes());
        key[24..32].copy_from_slice(&index.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        for x in out.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
    }

    fn root_increment(&self, index: u64, out: &mut [f64]) {
        self.normals(ROOT_TAG, index, out);
        let s = self.base_dt.sqrt();
        out.iter_mut().for_each(|x| *x *= s);
    }

    /// Splits `parent` (node `(level, index)`) into its left and right children.
    fn split(&self, level: u32, index: u64, parent: &[f64], left: &mut [f64], right: &mut [f64]) {
        self.normals(level as u64, index, left);
        let half_sd = 0.5 * self.step_at(level).sqrt();
        for k in 0..self.width {
            let l = 0.5 * parent[k] + half_sd * left[k];
            left[k] = l;
            right[k] = parent[k] - l;
        }
    }

    fn build_block(&self, root: u64) -> Block {
        let w = self.width;
        let mut levels = Vec::with_capacity(self.cache_level as usize + 1);
        let mut top = vec![0.0; w];
        self.root_increment(root, &mut top);
        levels.push(top);
        for l in 0..self.cache_level {
            let prev = &levels[l as usize];
            let count = prev.len() / w;
            let mut next = vec![0.0; 2 * prev.len()];
            for c in 0..count {
                let index = (root << l) + c as u64;
                let (left, right) = next[2 * c * w..(2 * c + 2) * w].split_at_mut(w);
                self.split(l, index, &prev[c * w..(c + 1) * w], left, right);
            }
            levels.push(next);
        }
        Block { root, levels }
    }

    /// Increment over `[index·h_l, (index+1)·h_l]` with `h_l = h₀·2^{−level}`.
    pub fn increment(&mut self, level: u32, index: u64, out: &mut [f64]) {
        assert_eq!(out.len(), self.width);
        if self.zero {
            out.iter_mut().for_each(|x| *x = 0.0);
            return;
        }
        if level <= self.cache_level {
            let root = index >> level;
            if self.block.as_ref().map_or(true, |b| b.root != root) {
                self.block = Some(self.build_block(root));
            }
            let b = self.block.as_ref().expect("block built");
            let off = (index - (root << level)) as usize * self.width;
            out.copy_from_slice(&b.levels[level as usize][off..off + self.width]);
            return;
        }
        let mut parent = vec![0.0; self.width];
        self.increment(level - 1, index / 2, &mut parent);
        let mut left = vec![0.0; self.width];
        let mut right = vec![0.0; self.width];
        self.split(level - 1, index / 2, &parent, &mut left, &mut right);
        out.copy_from_slice(if index % 2 == 0 { &left } else { &right });
    }

    pub fn increment_vec(&mut self, level: u32, index: u64) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        self.increment(level, index, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_independent_of_cache_level() {
        let mut a = NoiseStream::new(9, 3, 4, 0.01);
        let mut b = NoiseStream::new(9, 3, 4, 0.01).with_cache_level(5);
        for (level, index) in [(0u32, 0u64), (3, 17), (5, 63), (7, 300), (2, 9)] {
            assert_eq!(a.increment_vec(level, index), b.increment_vec(level, index));
        }
        let mut c = NoiseStream::new(9, 4, 4, 0.01);
        assert_ne!(a.increment_vec(0, 0), c.increment_vec(0, 0));
    }

    #[test]
    fn children_sum_to_parent() {
        let mut s = NoiseStream::new(1, 0, 3, 0.5).with_cache_level(4);
        for level in 0..8u32 {
            for index in 0..4u64 {
                let p = s.increment_vec(level, index);
                let l = s.increment_vec(level + 1, 2 * index);
                let r = s.increment_vec(level + 1, 2 * index + 1);
                for k in 0..3 {
                    assert!((l[k] + r[k] - p[k]).abs() <= 4.0 * f64::EPSILON * p[k].abs().max(1e-300) + 1e-300);
                }
            }
        }
    }

    #[test]
    fn increments_have_brownian_variance() {
        let h0 = 0.25;
        let mut s = NoiseStream::new(77, 0, 1, h0).with_cache_level(3);
        let n = 20000u64;
        let mut m2 = [0.0; 2];
        for k in 0..n {
            m2[0] += s.increment_vec(0, k)[0].powi(2);
            m2[1] += s.increment_vec(3, 8 * k + 5)[0].powi(2);
        }
        let v0 = m2[0] / n as f64;
        let v3 = m2[1] / n as f64;
        assert!((v0 / h0 - 1.0).abs() < 0.05, "{v0}");
        assert!((v3 / (h0 / 8.0) - 1.0).abs() < 0.05, "{v3}");
    }

    #[test]
    fn zero_stream() {
        let mut s = NoiseStream::zero(2, 0.1);
        assert_eq!(s.increment_vec(4, 11), vec![0.0, 0.0]);
    }
}

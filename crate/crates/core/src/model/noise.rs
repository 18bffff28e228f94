//! Counter-based Gaussian noise keyed by `(seed, path, step)`.
//!
//! Every path owns a ChaCha8 stream; step `k` of a path always consumes the
//! same fixed block of words, so random access and sequential reading agree
//! bit for bit and the result does not depend on evaluation order.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const TWO_PI: f64 = std::f64::consts::TAU;
/// Streams at or above this offset are auxiliary channels.
const CHANNEL_STRIDE: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoiseSource {
    master_seed: u64,
    dim: usize,
    channel: u64,
}

impl NoiseSource {
    pub fn new(master_seed: u64, dim: usize) -> Self {
        assert!(dim > 0, "noise dimension must be positive");
        Self { master_seed, dim, channel: 0 }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// An independent source sharing the seed, for auxiliary randomness.
    pub fn channel(&self, channel: u64) -> Self {
        Self { channel, ..*self }
    }

    /// Same seed and channel, different vector dimension.
    pub fn with_dim(&self, dim: usize) -> Self {
        Self { dim, ..*self }
    }

    fn words_per_step(&self) -> u128 {
        // two u64 (four u32 words) per Box-Muller pair
        4 * self.dim.div_ceil(2) as u128
    }

    fn rng_for(&self, path: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.channel * CHANNEL_STRIDE + path as u64);
        rng
    }

    /// Standard normal vector for `(path, step)`.
    pub fn standard_normals(&self, path: usize, step: usize, out: &mut [f64]) {
        let mut rng = self.rng_for(path);
        rng.set_word_pos(step as u128 * self.words_per_step());
        fill_normals(&mut rng, &mut out[..self.dim]);
    }

    /// `ΔW ~ N(0, dt I)` for `(path, step)`.
    pub fn increment(&self, path: usize, step: usize, dt: f64, out: &mut [f64]) {
        self.standard_normals(path, step, out);
        let s = dt.sqrt();
        out[..self.dim].iter_mut().for_each(|v| *v *= s);
    }

    /// Sequential reader over the steps of one path, starting at step 0.
    pub fn path(&self, path: usize) -> PathNoise {
        PathNoise { rng: self.rng_for(path), dim: self.dim }
    }
}

/// Sequential view of one path's stream; step `k` of the reader equals
/// `NoiseSource::standard_normals(path, k, ..)`.
pub struct PathNoise {
    rng: ChaCha8Rng,
    dim: usize,
}

impl PathNoise {
    #[inline]
    pub fn next_normals(&mut self, out: &mut [f64]) {
        fill_normals(&mut self.rng, &mut out[..self.dim]);
    }
}

#[inline]
fn unit_open(bits: u64) -> f64 {
    // (0, 1]: never zero so the logarithm stays finite
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn fill_normals(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    let mut chunks = out.chunks_mut(2);
    for c in &mut chunks {
        let u1 = unit_open(rng.next_u64());
        let u2 = unit_open(rng.next_u64());
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, co) = (TWO_PI * u2).sin_cos();
        c[0] = r * co;
        if c.len() > 1 {
            c[1] = r * s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_access_matches_sequential() {
        for dim in [1usize, 2, 3] {
            let src = NoiseSource::new(7, dim);
            let mut seq = src.path(11);
            let mut a = vec![0.0; dim];
            let mut b = vec![0.0; dim];
            for k in 0..40 {
                seq.next_normals(&mut a);
                src.standard_normals(11, k, &mut b);
                assert_eq!(a, b, "dim {dim} step {k}");
            }
        }
    }

    #[test]
    fn order_independent() {
        let src = NoiseSource::new(3, 2);
        let mut fwd = Vec::new();
        for k in 0..20 {
            let mut v = [0.0; 2];
            src.standard_normals(5, k, &mut v);
            fwd.push(v);
        }
        for k in (0..20).rev() {
            let mut v = [0.0; 2];
            src.standard_normals(5, k, &mut v);
            assert_eq!(v, fwd[k]);
        }
    }

    #[test]
    fn channels_and_paths_differ() {
        let src = NoiseSource::new(1, 1);
        let mut a = [0.0];
        let mut b = [0.0];
        let mut c = [0.0];
        src.standard_normals(0, 0, &mut a);
        src.standard_normals(1, 0, &mut b);
        src.channel(1).standard_normals(0, 0, &mut c);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn increment_moments() {
        let n = 200_000usize;
        let dt = 0.01;
        let src = NoiseSource::new(2024, 2);
        let mut sum = [0.0; 2];
        let mut sq = [0.0; 2];
        let mut v = [0.0; 2];
        for p in 0..n {
            src.increment(p, p % 13, dt, &mut v);
            for i in 0..2 {
                sum[i] += v[i];
                sq[i] += v[i] * v[i];
            }
        }
        for i in 0..2 {
            let mean = sum[i] / n as f64;
            let var = sq[i] / n as f64 - mean * mean;
            assert!(mean.abs() < 4.0 * dt.sqrt() / (n as f64).sqrt(), "mean {mean}");
            assert!((var / dt - 1.0).abs() < 0.05, "var {var}");
        }
    }
}

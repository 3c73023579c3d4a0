//! Seeded, counter-based random sampling.
//!
//! The generator is a pure function of `(seed, counter)`: draw `k` applies
//! the SplitMix64 output mix to `seed + (k+1) * GOLDEN_GAMMA`. The sequence
//! for a given seed is therefore identical on every platform, independent of
//! call history layout, and cheap to fork into independent substreams.
//!
//! Normal variates use the Box-Muller transform on 53-bit uniforms. Each
//! call to [`Rng::sample_normal`] consumes uniforms in pairs and discards a
//! trailing unused half, so the stream position after a call depends only on
//! the requested size.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based pseudorandom generator (SplitMix64 output function).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    seed: u64,
    counter: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { seed, counter: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent substream `stream_id` of the same seed. Used for
    /// baseline trials and verification so they never perturb the main
    /// stream's consumption.
    pub fn substream(&self, stream_id: u64) -> Rng {
        Rng::new(mix64(
            self.seed ^ mix64(stream_id.wrapping_mul(GOLDEN_GAMMA) ^ 0xA5A5_A5A5_5A5A_5A5A),
        ))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.seed.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`; never zero, safe under `ln`.
    #[inline]
    fn next_f64_open_zero(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, bound)` by rejection, bias-free.
    pub fn next_index(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "next_index: bound must be positive");
        let bound = bound as u64;
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % bound) as usize;
            }
        }
    }

    /// One pair of independent standard normals (Box-Muller).
    #[inline]
    fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.next_f64_open_zero();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        (r * theta.cos(), r * theta.sin())
    }

    /// Matrix of i.i.d. standard normal entries.
    pub fn sample_normal(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "sample_normal: dimensions must be positive, got {rows}x{cols}"
            )));
        }
        let n = rows * cols;
        let mut data = Vec::with_capacity(n);
        while data.len() + 2 <= n {
            let (a, b) = self.normal_pair();
            data.push(a);
            data.push(b);
        }
        if data.len() < n {
            let (a, _) = self.normal_pair();
            data.push(a);
        }
        Matrix::from_vec(rows, cols, data)
    }

    /// `n` points sampled uniformly on the unit sphere in `ambient_dim`
    /// dimensions (each row has unit Euclidean norm).
    pub fn sample_uniform_sphere(&mut self, n: usize, ambient_dim: usize) -> Result<Matrix> {
        if n == 0 || ambient_dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "sample_uniform_sphere: dimensions must be positive, got {n}x{ambient_dim}"
            )));
        }
        let mut out = Matrix::zeros(n, ambient_dim);
        for r in 0..n {
            loop {
                let draw = self.sample_normal(1, ambient_dim)?;
                let norm = draw.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    for (o, &v) in out.row_mut(r).iter_mut().zip(draw.as_slice()) {
                        *o = v / norm;
                    }
                    break;
                }
            }
        }
        Ok(out)
    }
}

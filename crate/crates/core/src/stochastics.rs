//! Seeded random streams.
//!
//! Every sampled quantity in the harness is drawn from an [`RngStream`]
//! addressed by `(master_seed, stream_path)`. The stream's key is derived by
//! hashing the address, so a stream never depends on how many draws other
//! streams have made and tasks can be evaluated concurrently without
//! perturbing each other.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const DOMAIN_TAG: &[u8] = b"bandit-oracles/rng-stream/v1";

/// Well-known purpose tags used as the last element of a stream path.
pub mod purpose {
    pub const GENERATE: u64 = 1;
    pub const MITIGATE: u64 = 2;
    pub const POLICY: u64 = 3;
    pub const BANDIT: u64 = 4;
    pub const CANDIDATES: u64 = 5;
}

/// A deterministic random stream addressed by a master seed and a path.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    path: Vec<u64>,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, path: &[u64]) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(DOMAIN_TAG);
        hasher.update(master_seed.to_le_bytes());
        hasher.update((path.len() as u64).to_le_bytes());
        for p in path {
            hasher.update(p.to_le_bytes());
        }
        let key: [u8; 32] = hasher.finalize().into();
        Self {
            master_seed,
            path: path.to_vec(),
            rng: ChaCha20Rng::from_seed(key),
        }
    }

    /// Stream addressed by this stream's path extended with `tag`.
    ///
    /// The child depends only on the address, not on draws already taken
    /// from `self`.
    pub fn child(&self, tag: u64) -> Self {
        let mut path = self.path.clone();
        path.push(tag);
        Self::new(self.master_seed, &path)
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// Uniform draw from `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform index in `0..n`. Panics when `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

pub fn bernoulli(p: f64, rng: &mut RngStream) -> Result<bool> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(format!("bernoulli mean {p} outside [0, 1]")));
    }
    Ok(rng.unit() < p)
}

/// Vector of `d` coordinates, each i.i.d. uniform on `[low, high]`.
pub fn uniform_box(low: f64, high: f64, d: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    if !(low < high) || !low.is_finite() || !high.is_finite() {
        return Err(Error::param(format!("empty range [{low}, {high}]")));
    }
    if d == 0 {
        return Err(Error::param("dimension must be at least 1"));
    }
    let width = high - low;
    Ok((0..d).map(|_| low + width * rng.unit()).collect())
}

pub fn gaussian(mean: f64, sd: f64, rng: &mut RngStream) -> Result<f64> {
    if !(sd >= 0.0) {
        return Err(Error::param(format!("standard deviation {sd} is negative")));
    }
    let z: f64 = StandardNormal.sample(rng);
    if sd == 0.0 {
        return Ok(mean);
    }
    Ok(mean + sd * z)
}

/// Uniformly distributed unit vector in `R^d` (normalized Gaussian draw).
pub fn uniform_sphere(d: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::param("dimension must be at least 1"));
    }
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-300 {
            return Ok(v.into_iter().map(|x| x / norm).collect());
        }
    }
}

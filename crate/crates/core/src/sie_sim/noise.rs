//! Brownian increments indexed by absolute site position.
//!
//! Each (seed, replica, site coordinate) owns a ChaCha stream, so two
//! lattices that share a physical site draw identical increments there.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::kernels::Lattice;

/// Coordinates are keyed on a 1e-9 grid so that n·δ computed on different
/// lattices maps to the same stream.
fn coordinate_key(x: f64) -> i64 {
    (x * 1e9).round() as i64
}

pub fn site_stream(seed: u64, replica: u64, point: &[f64]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(b"islt-noise-v1");
    h.update(seed.to_le_bytes());
    h.update(replica.to_le_bytes());
    h.update((point.len() as u64).to_le_bytes());
    for &x in point {
        h.update(coordinate_key(x).to_le_bytes());
    }
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Increments ΔW^y_j ~ N(0, Δt), stored step-major: `increments[j * L + y]`.
#[derive(Debug, Clone)]
pub struct NoiseField {
    pub seed: u64,
    pub replica: u64,
    pub dt: f64,
    pub steps: usize,
    pub sites: usize,
    pub increments: Vec<f64>,
}

impl NoiseField {
    pub fn step(&self, j: usize) -> &[f64] {
        &self.increments[j * self.sites..(j + 1) * self.sites]
    }

    pub fn site_series(&self, y: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.steps).map(move |j| self.increments[j * self.sites + y])
    }
}

/// Noise on the truncation of `lat` for `steps` steps of size `dt`.
pub fn gen_noise(seed: u64, replica: u64, lat: &Lattice, steps: usize, dt: f64) -> NoiseField {
    let sites = lat.sites();
    let l = sites.len();
    let sd = dt.sqrt();
    let mut increments = vec![0.0; steps * l];
    for (y, s) in sites.iter().enumerate() {
        let mut rng = site_stream(seed, replica, &lat.to_point(s));
        for j in 0..steps {
            let z: f64 = StandardNormal.sample(&mut rng);
            increments[j * l + y] = sd * z;
        }
    }
    NoiseField {
        seed,
        replica,
        dt,
        steps,
        sites: l,
        increments,
    }
}

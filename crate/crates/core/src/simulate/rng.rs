//! Seeded random streams.
//!
//! Every stream is ChaCha8 keyed by `seed_from_u64(seed)` with the ChaCha
//! stream id set to a fixed function of what the stream is for (see the
//! `*_stream` functions). Standard normals come from the Box–Muller
//! transform on 53-bit uniforms, so any ChaCha8 implementation reproduces
//! the same draws.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::matalg::Mat;

/// Stream used to draw the population (Z, Z₀).
pub const POPULATION_STREAM: u64 = 0;

/// Stream used for the chance-baseline subspaces.
pub const BASELINE_STREAM: u64 = u64::MAX;

/// Stream for replicate `r` of an expectation check.
pub fn replicate_stream(r: usize) -> u64 {
    1 + r as u64
}

/// Stream for replicate `r` at grid point `g` of a recovery experiment.
pub fn grid_stream(g: usize, r: usize) -> u64 {
    ((g as u64 + 1) << 32) | (r as u64 + 1)
}

/// Gaussian sampler over one ChaCha8 stream.
#[derive(Clone, Debug)]
pub struct NormalStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        NormalStream { rng, spare: None }
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal; draws come in Box–Muller pairs (cosine first).
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    /// rows×cols matrix of independent standard normals, filled row by row.
    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> Mat {
        Mat::from_fn(rows, cols, |_, _| self.normal())
    }
}

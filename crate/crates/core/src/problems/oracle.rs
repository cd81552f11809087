//! Stochastic gradients keyed by `(seed, worker, draw_index)`.
//!
//! Each draw seeds a ChaCha8 stream from the 32-byte key
//! `seed ‖ worker ‖ draw_index ‖ "birchsgd"` (little-endian u64s), so a draw
//! never depends on the order in which events were simulated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Problem, ProblemError};
use crate::tree::SampleId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    Exact,
    /// Isotropic Gaussian noise of total variance `sigma2`.
    Gaussian { sigma2: f64 },
    /// Gradient of one uniformly drawn summand.
    SingleSample,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticOracle {
    pub noise: NoiseKind,
    pub seed: u64,
}

impl StochasticOracle {
    pub fn new(noise: NoiseKind, seed: u64) -> Self {
        StochasticOracle { noise, seed }
    }

    pub fn rng_for(&self, worker: usize, draw: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&(worker as u64).to_le_bytes());
        key[16..24].copy_from_slice(&draw.to_le_bytes());
        key[24..].copy_from_slice(b"birchsgd");
        ChaCha8Rng::from_seed(key)
    }

    pub fn grad_stochastic(
        &self,
        problem: &Problem,
        x: &[f64],
        worker: usize,
        draw: u64,
    ) -> Result<(Vec<f64>, SampleId), ProblemError> {
        let sample = SampleId::from_draw(worker, draw);
        let g = match self.noise {
            NoiseKind::Exact => problem.grad_exact(x)?,
            NoiseKind::Gaussian { sigma2 } => {
                let mut g = problem.grad_exact(x)?;
                if sigma2 > 0.0 {
                    let sd = (sigma2 / g.len() as f64).sqrt();
                    let mut rng = self.rng_for(worker, draw);
                    for v in g.iter_mut() {
                        let z: f64 = rng.sample(StandardNormal);
                        *v += sd * z;
                    }
                }
                g
            }
            NoiseKind::SingleSample => {
                problem.grad_exact(x).map(|_| ())?;
                let mut rng = self.rng_for(worker, draw);
                let i = rng.gen_range(0..problem.num_samples());
                problem.grad_sample(x, i)
            }
        };
        Ok((g, sample))
    }
}

//! The four timing regimes of the logistic-regression experiments, plus
//! user-supplied times.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::timing::{TimingError, TimingModel};

#[derive(Debug, Clone, PartialEq)]
pub enum Regime {
    /// `h_i = 10`, `τ_i = 0`.
    Classical,
    /// `h_i = 10`, `τ_i = 100`.
    SlowComm,
    /// `h_i ∈ {1, 10}` at random, `τ_i = 0`.
    HeteroCompute,
    /// `h_i = 10`, `τ_i ∈ {1, 100}` at random.
    HeteroComm,
    Custom { h: Vec<f64>, tau: Vec<f64> },
}

impl Regime {
    pub const PRESETS: [&'static str; 4] = ["classical", "slow-comm", "hetero-compute", "hetero-comm"];

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "classical" => Regime::Classical,
            "slow-comm" => Regime::SlowComm,
            "hetero-compute" => Regime::HeteroCompute,
            "hetero-comm" => Regime::HeteroComm,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regime::Classical => "classical",
            Regime::SlowComm => "slow-comm",
            Regime::HeteroCompute => "hetero-compute",
            Regime::HeteroComm => "hetero-comm",
            Regime::Custom { .. } => "custom",
        }
    }

    /// Draws the per-worker times. Random regimes are a function of `seed`.
    pub fn model(&self, n: usize, seed: u64) -> Result<TimingModel, TimingError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pick = |choices: &[f64]| -> Vec<f64> {
            (0..n).map(|_| *choices.choose(&mut rng).expect("non-empty")).collect()
        };
        match self {
            Regime::Classical => TimingModel::uniform(n, 10.0, 0.0),
            Regime::SlowComm => TimingModel::uniform(n, 10.0, 100.0),
            Regime::HeteroCompute => TimingModel::new(pick(&[1.0, 10.0]), vec![0.0; n]),
            Regime::HeteroComm => TimingModel::new(vec![10.0; n], pick(&[1.0, 100.0])),
            Regime::Custom { h, tau } => {
                if h.len() != n {
                    return Err(TimingError::Invalid(format!("custom regime has {} workers, asked for {n}", h.len())));
                }
                TimingModel::new(h.clone(), tau.clone())
            }
        }
    }
}

/// Timing model of a named preset.
pub fn regime_preset(name: &str, n: usize, seed: u64) -> Result<TimingModel, TimingError> {
    match Regime::from_name(name) {
        Some(r) => r.model(n, seed),
        None => Err(TimingError::Invalid(format!("unknown regime `{name}`"))),
    }
}

//! Computation/communication time models and the closed-form time bounds and
//! optimal hyperparameters derived from them.

mod formulas;

pub use formulas::{
    optimal_b, optimal_m, optimal_s, t_asynclocal, t_dualprocess, t_local, t_local_async,
    t_rennala, total_time_bound, BoundMethod,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TimingError {
    #[error("timing model has no workers")]
    NoWorkers,
    #[error("invalid timing parameter: {0}")]
    Invalid(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    ComputeOnly,
    UniformComm,
    PerWorkerComm,
}

/// Per-worker seconds per stochastic gradient (`h`) and per vector transfer
/// in either direction (`tau`).
#[derive(Debug, Clone, PartialEq)]
pub struct TimingModel {
    pub h: Vec<f64>,
    pub tau: Vec<f64>,
}

impl TimingModel {
    pub fn new(h: Vec<f64>, tau: Vec<f64>) -> Result<Self, TimingError> {
        if h.is_empty() {
            return Err(TimingError::NoWorkers);
        }
        if h.len() != tau.len() {
            return Err(TimingError::Invalid(format!(
                "{} compute times but {} communication times",
                h.len(),
                tau.len()
            )));
        }
        if h.iter().any(|&v| !(v > 0.0)) {
            return Err(TimingError::Invalid("compute times must be positive".into()));
        }
        if tau.iter().any(|&v| !(v >= 0.0)) {
            return Err(TimingError::Invalid("communication times must be non-negative".into()));
        }
        Ok(TimingModel { h, tau })
    }

    pub fn compute_only(h: Vec<f64>) -> Result<Self, TimingError> {
        let n = h.len();
        Self::new(h, vec![0.0; n])
    }

    pub fn uniform(n: usize, h: f64, tau: f64) -> Result<Self, TimingError> {
        Self::new(vec![h; n], vec![tau; n])
    }

    pub fn n(&self) -> usize {
        self.h.len()
    }

    pub fn kind(&self) -> ModelKind {
        if self.tau.iter().all(|&t| t == 0.0) {
            ModelKind::ComputeOnly
        } else if self.tau.iter().all(|&t| t == self.tau[0]) {
            ModelKind::UniformComm
        } else {
            ModelKind::PerWorkerComm
        }
    }

    pub fn h_max(&self) -> f64 {
        self.h.iter().cloned().fold(0.0, f64::max)
    }

    pub fn tau_max(&self) -> f64 {
        self.tau.iter().cloned().fold(0.0, f64::max)
    }
}

/// Method hyperparameters; each method reads the fields it uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub b: usize,
    pub m: usize,
    pub s: usize,
    pub g: usize,
    pub gamma: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            b: 1,
            m: 1,
            s: 1,
            g: 1,
            gamma: 0.01,
        }
    }
}

//! Objectives, stochastic gradient oracles and the step-size / iteration
//! budget formulas that consume their constants.

mod logistic;
mod oracle;
mod quadratic;

pub use logistic::LogisticProblem;
pub use oracle::{NoiseKind, StochasticOracle};
pub use quadratic::QuadraticProblem;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("point has dimension {got}, problem has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dataset: {0}")]
    Dataset(String),
}

/// The constants a convergence bound needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemSpec {
    pub dimension: usize,
    pub l: f64,
    pub f_star: f64,
    pub sigma2: f64,
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub enum Problem {
    Quadratic(QuadraticProblem),
    Logistic(LogisticProblem),
}

impl Problem {
    pub fn dim(&self) -> usize {
        match self {
            Problem::Quadratic(_) => 2,
            Problem::Logistic(p) => p.dim(),
        }
    }

    pub fn smoothness(&self) -> f64 {
        match self {
            Problem::Quadratic(q) => q.l,
            Problem::Logistic(p) => p.smoothness(),
        }
    }

    pub fn f_star(&self) -> f64 {
        0.0
    }

    fn check(&self, x: &[f64]) -> Result<(), ProblemError> {
        if x.len() != self.dim() {
            return Err(ProblemError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, ProblemError> {
        self.check(x)?;
        Ok(match self {
            Problem::Quadratic(q) => q.value(x),
            Problem::Logistic(p) => p.value(x),
        })
    }

    pub fn grad_exact(&self, x: &[f64]) -> Result<Vec<f64>, ProblemError> {
        self.check(x)?;
        Ok(match self {
            Problem::Quadratic(q) => q.grad(x),
            Problem::Logistic(p) => p.grad(x),
        })
    }

    /// Gradient of a single summand, for finite-sum objectives.
    pub(crate) fn grad_sample(&self, x: &[f64], index: usize) -> Vec<f64> {
        match self {
            Problem::Quadratic(q) => q.grad(x),
            Problem::Logistic(p) => p.grad_sample(x, index),
        }
    }

    pub(crate) fn num_samples(&self) -> usize {
        match self {
            Problem::Quadratic(_) => 1,
            Problem::Logistic(p) => p.num_samples(),
        }
    }

    pub fn spec(&self, x0: &[f64], sigma2: f64) -> Result<ProblemSpec, ProblemError> {
        Ok(ProblemSpec {
            dimension: self.dim(),
            l: self.smoothness(),
            f_star: self.f_star(),
            sigma2,
            delta: self.value(x0)? - self.f_star(),
        })
    }
}

fn positive(name: &str, v: f64) -> Result<(), ProblemError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ProblemError::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// `min{1/(2L), 1/(2RL), ε/(4σ²L)}`; a term with a zero denominator is +∞.
pub fn theorem1_step_size(l: f64, r: u64, sigma2: f64, epsilon: f64) -> Result<f64, ProblemError> {
    positive("L", l)?;
    positive("epsilon", epsilon)?;
    if sigma2 < 0.0 {
        return Err(ProblemError::InvalidParameter("sigma2 must be non-negative".into()));
    }
    let mut g = 1.0 / (2.0 * l);
    if r > 0 {
        g = g.min(1.0 / (2.0 * r as f64 * l));
    }
    if sigma2 > 0.0 {
        g = g.min(epsilon / (4.0 * sigma2 * l));
    }
    Ok(g)
}

/// `⌈4(R+1)LΔ/ε + 8σ²LΔ/ε²⌉`.
pub fn theorem1_iteration_budget(
    l: f64,
    delta: f64,
    sigma2: f64,
    epsilon: f64,
    r: u64,
) -> Result<u64, ProblemError> {
    positive("L", l)?;
    positive("delta", delta)?;
    positive("epsilon", epsilon)?;
    if sigma2 < 0.0 {
        return Err(ProblemError::InvalidParameter("sigma2 must be non-negative".into()));
    }
    let k = 4.0 * (r as f64 + 1.0) * l * delta / epsilon + 8.0 * sigma2 * l * delta / (epsilon * epsilon);
    // guard against 839.9999999 style rounding of exact integers
    let rounded = k.round();
    Ok(if (k - rounded).abs() <= 1e-9 * k.max(1.0) { rounded as u64 } else { k.ceil() as u64 })
}

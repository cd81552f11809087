use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::ProblemError;

/// Mean logistic loss plus `(l2/2)‖w‖²` over rows of `features`.
#[derive(Debug, Clone)]
pub struct LogisticProblem {
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    l2: f64,
    l: f64,
}

fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LogisticProblem {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<f64>, l2: f64) -> Result<Self, ProblemError> {
        if features.is_empty() || features.len() != labels.len() {
            return Err(ProblemError::Dataset("need one label per non-empty feature row".into()));
        }
        let d = features[0].len();
        if d == 0 || features.iter().any(|r| r.len() != d) {
            return Err(ProblemError::Dataset("ragged or empty feature rows".into()));
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(ProblemError::Dataset("labels must be +1 or -1".into()));
        }
        if !(l2 >= 0.0) {
            return Err(ProblemError::InvalidParameter("l2_reg must be non-negative".into()));
        }
        let m = features.len();
        let x = DMatrix::from_fn(m, d, |i, j| features[i][j]);
        let gram = x.transpose() * &x;
        let lmax = gram
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(0.0f64, f64::max);
        let l = lmax / (4.0 * m as f64) + l2;
        Ok(LogisticProblem {
            features,
            labels,
            l2,
            l,
        })
    }

    /// Two Gaussian clusters centred at `±0.5·1` with identity covariance.
    pub fn synthetic(samples: usize, dim: usize, l2: f64, seed: u64) -> Result<Self, ProblemError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut features = Vec::with_capacity(samples);
        let mut labels = Vec::with_capacity(samples);
        for i in 0..samples {
            let y = if i % 2 == 0 { 1.0 } else { -1.0 };
            let row = (0..dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    0.5 * y + z
                })
                .collect();
            features.push(row);
            labels.push(y);
        }
        Self::new(features, labels, l2)
    }

    /// The default desk-scale dataset: 200 samples, 10 features, l2 = 1e-3.
    pub fn synthetic_default() -> Self {
        Self::synthetic(200, 10, 1e-3, 20_240_601).expect("valid synthetic data")
    }

    /// Loads a CSV with a header row; column `y` holds ±1 labels, every other
    /// column is a feature.
    pub fn from_csv(path: &Path, l2: f64) -> Result<Self, ProblemError> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| ProblemError::Dataset(e.to_string()))?;
        let headers = rdr.headers().map_err(|e| ProblemError::Dataset(e.to_string()))?.clone();
        let yi = headers
            .iter()
            .position(|h| h.trim() == "y")
            .ok_or_else(|| ProblemError::Dataset("no `y` column".into()))?;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| ProblemError::Dataset(e.to_string()))?;
            let mut f = Vec::with_capacity(rec.len().saturating_sub(1));
            for (j, v) in rec.iter().enumerate() {
                let v: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| ProblemError::Dataset(format!("row {}: bad number `{v}`", row + 2)))?;
                if j == yi {
                    labels.push(v);
                } else {
                    f.push(v);
                }
            }
            features.push(f);
        }
        Self::new(features, labels, l2)
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn num_samples(&self) -> usize {
        self.features.len()
    }

    pub fn smoothness(&self) -> f64 {
        self.l
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        let m = self.features.len() as f64;
        let loss: f64 = self
            .features
            .iter()
            .zip(&self.labels)
            .map(|(x, y)| log1p_exp(-y * dot(x, w)))
            .sum();
        loss / m + 0.5 * self.l2 * dot(w, w)
    }

    pub fn grad(&self, w: &[f64]) -> Vec<f64> {
        let m = self.features.len() as f64;
        let mut g: Vec<f64> = w.iter().map(|v| self.l2 * v).collect();
        for (x, y) in self.features.iter().zip(&self.labels) {
            let c = -y * sigmoid(-y * dot(x, w)) / m;
            for (gj, xj) in g.iter_mut().zip(x) {
                *gj += c * xj;
            }
        }
        g
    }

    pub fn grad_sample(&self, w: &[f64], i: usize) -> Vec<f64> {
        let (x, y) = (&self.features[i], self.labels[i]);
        let c = -y * sigmoid(-y * dot(x, w));
        x.iter().zip(w).map(|(xj, wj)| c * xj + self.l2 * wj).collect()
    }

    /// Approximate minimum value, by gradient descent with step 1/L.
    pub fn estimate_min(&self, iters: usize) -> f64 {
        let mut w = vec![0.0; self.dim()];
        for _ in 0..iters {
            let g = self.grad(&w);
            for (wj, gj) in w.iter_mut().zip(&g) {
                *wj -= gj / self.l;
            }
        }
        self.value(&w)
    }
}

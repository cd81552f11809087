use std::str::FromStr;

use super::{TimingError, TimingModel};
use crate::problems::ProblemSpec;

fn sorted(h: &[f64]) -> Result<Vec<f64>, TimingError> {
    if h.is_empty() {
        return Err(TimingError::NoWorkers);
    }
    let mut v = h.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    Ok(v)
}

/// `2 · min_m (Σ_{i≤m} 1/h_i)^{-1} (B + M·m)` over the fastest-first prefix.
fn prefix_min(h: &[f64], b: f64, m_mult: f64) -> Result<f64, TimingError> {
    let h = sorted(h)?;
    let mut inv = 0.0;
    let mut best = f64::INFINITY;
    for (i, hi) in h.iter().enumerate() {
        inv += 1.0 / hi;
        let m = (i + 1) as f64;
        best = best.min((b + m_mult * m) / inv);
    }
    Ok(2.0 * best)
}

pub fn t_rennala(h: &[f64], b: usize) -> Result<f64, TimingError> {
    prefix_min(h, b as f64, 1.0)
}

pub fn t_local(h: &[f64], b: usize) -> Result<f64, TimingError> {
    prefix_min(h, b as f64, 1.0)
}

pub fn t_local_async(h: &[f64], b: usize) -> Result<f64, TimingError> {
    prefix_min(h, b as f64, 1.0)
}

pub fn t_asynclocal(h: &[f64], b: usize, m: usize) -> Result<f64, TimingError> {
    prefix_min(h, b as f64, m as f64)
}

/// `4 · min_m max{max(h_m, τ_m), (Σ_{i≤m} 1/h_i)^{-1} B}` with workers
/// ordered by `max(h_i, τ_i)`.
pub fn t_dualprocess(h: &[f64], tau: &[f64], b: usize) -> Result<f64, TimingError> {
    if h.is_empty() {
        return Err(TimingError::NoWorkers);
    }
    if h.len() != tau.len() {
        return Err(TimingError::Invalid("h and tau lengths differ".into()));
    }
    let mut w: Vec<(f64, f64)> = h.iter().cloned().zip(tau.iter().cloned()).collect();
    w.sort_by(|a, b| a.0.max(a.1).partial_cmp(&b.0.max(b.1)).expect("finite times"));
    let mut inv = 0.0;
    let mut best = f64::INFINITY;
    for &(hi, ti) in &w {
        inv += 1.0 / hi;
        best = best.min(hi.max(ti).max(b as f64 / inv));
    }
    Ok(4.0 * best)
}

pub fn optimal_b(sigma2: f64, epsilon: f64) -> usize {
    ((sigma2 / epsilon).ceil() as usize).max(1)
}

pub fn optimal_m(sigma2: f64, n: usize, epsilon: f64) -> usize {
    ((sigma2 / (n as f64 * epsilon)).ceil() as usize).max(1)
}

pub fn optimal_s(n: usize, epsilon: f64, sigma2: f64) -> usize {
    if sigma2 <= 0.0 {
        return n;
    }
    let s = ((n * n) as f64 * epsilon / sigma2).ceil();
    if s >= n as f64 {
        n
    } else {
        (s as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMethod {
    Rennala,
    Local,
    Cycle,
    AsyncLocal,
    Ringmaster,
    DualProcess,
    FedavgCanonical,
}

impl BoundMethod {
    pub const ALL: [BoundMethod; 7] = [
        BoundMethod::Rennala,
        BoundMethod::Local,
        BoundMethod::Cycle,
        BoundMethod::AsyncLocal,
        BoundMethod::Ringmaster,
        BoundMethod::DualProcess,
        BoundMethod::FedavgCanonical,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BoundMethod::Rennala => "rennala",
            BoundMethod::Local => "local",
            BoundMethod::Cycle => "cycle",
            BoundMethod::AsyncLocal => "async-local",
            BoundMethod::Ringmaster => "ringmaster",
            BoundMethod::DualProcess => "dual-process",
            BoundMethod::FedavgCanonical => "fedavg-canonical",
        }
    }
}

impl FromStr for BoundMethod {
    type Err = TimingError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BoundMethod::ALL
            .iter()
            .find(|m| m.name() == s)
            .copied()
            .ok_or_else(|| TimingError::UnknownMethod(s.to_string()))
    }
}

/// Total time to an ε-stationary point with every O-constant set to 1.
///
/// The `(h, τ)` forms use `h = max h_i` and `τ = max τ_i`; the dual-process
/// bound uses the per-worker lists.
pub fn total_time_bound(
    method: BoundMethod,
    timing: &TimingModel,
    p: &ProblemSpec,
    epsilon: f64,
) -> Result<f64, TimingError> {
    if !(epsilon > 0.0) {
        return Err(TimingError::Invalid("epsilon must be positive".into()));
    }
    let n = timing.n() as f64;
    let (h, tau) = (timing.h_max(), timing.tau_max());
    let a = p.l * p.delta / epsilon;
    let c = p.sigma2 * p.l * p.delta / (n * epsilon * epsilon);
    Ok(match method {
        BoundMethod::Rennala | BoundMethod::Local | BoundMethod::AsyncLocal => tau * a + h * (a + c),
        BoundMethod::Ringmaster | BoundMethod::Cycle => (tau + h) * (a + c),
        BoundMethod::FedavgCanonical => {
            (tau * h * p.l * p.l * p.sigma2 * p.delta * p.delta / epsilon.powi(3)).sqrt()
                + tau * a
                + h * (a + c)
        }
        BoundMethod::DualProcess => {
            let mut w: Vec<(f64, f64)> = timing.h.iter().cloned().zip(timing.tau.iter().cloned()).collect();
            w.sort_by(|x, y| x.0.max(x.1).partial_cmp(&y.0.max(y.1)).expect("finite times"));
            let mut inv = 0.0;
            let mut best = f64::INFINITY;
            for &(hi, ti) in &w {
                inv += 1.0 / hi;
                best = best.min(hi.max(ti).max(p.sigma2 / epsilon / inv));
            }
            best * a
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_formula_examples() {
        assert_eq!(t_rennala(&[1.0, 1.0], 2).unwrap(), 4.0);
        assert_eq!(t_rennala(&[1.0], 1).unwrap(), 4.0);
        assert_eq!(t_rennala(&[1.0, 1.0, 1e300], 2).unwrap(), 4.0);
        assert_eq!(t_asynclocal(&[1.0, 1.0], 4, 2).unwrap(), 8.0);
        assert_eq!(t_asynclocal(&[3.0, 1.0], 5, 1).unwrap(), t_rennala(&[1.0, 3.0], 5).unwrap());
        assert_eq!(t_dualprocess(&[1.0], &[1.0], 2).unwrap(), 8.0);
        assert_eq!(t_dualprocess(&[1.0, 1.0], &[0.0, 0.0], 4).unwrap(), 8.0);
        assert_eq!(t_dualprocess(&[1.0, 1.0], &[0.0, 1e300], 4).unwrap(), 16.0);
        assert_eq!(t_rennala(&[], 1), Err(TimingError::NoWorkers));
    }

    #[test]
    fn optimal_hyperparameters() {
        assert_eq!(optimal_b(100.0, 1.0), 100);
        assert_eq!(optimal_b(0.0, 1.0), 1);
        assert_eq!(optimal_b(10.0, 3.0), 4);
        assert_eq!(optimal_m(100.0, 10, 1.0), 10);
        assert_eq!(optimal_m(0.0, 10, 1.0), 1);
        assert_eq!(optimal_m(100.0, 7, 1.0), 15);
        assert_eq!(optimal_s(10, 1.0, 1000.0), 1);
        assert_eq!(optimal_s(10, 1.0, 0.0), 10);
        assert_eq!(optimal_s(10, 1.0, 1e-9), 10);
        assert_eq!(optimal_s(4, 1.0, 8.0), 2);
    }

    #[test]
    fn bound_names_round_trip() {
        for m in BoundMethod::ALL {
            assert_eq!(m.name().parse::<BoundMethod>().unwrap(), m);
        }
        assert!("picky".parse::<BoundMethod>().is_err());
    }
}

//! One simulator policy per method, plus each method's distance bound and
//! step-size rule.

mod async_local;
mod basic;
mod cycle;
mod fedavg;
mod grouped;
mod local;
mod meta;
mod rennala;
mod ringmaster;

pub use async_local::AsyncLocal;
pub use basic::{Synchronized, Vanilla};
pub use cycle::Cycle;
pub use fedavg::FedAvg;
pub use grouped::{LocalAsync, Nested};
pub use local::{DualProcess, Local};
pub use meta::{AllReady, FastestTauFirst, MetaLocal, NeverSync, RandomSubset, SyncChoice, SyncStrategy, SyncView};
pub use rennala::Rennala;
pub use ringmaster::Ringmaster;

pub use crate::timing::HyperParams;

use crate::problems::ProblemError;
use crate::sim::Policy;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    RandomSubset,
    FastestTauFirst,
    AllReady,
    /// Only forced syncs; identical to Local SGD.
    AllAtB,
    Never,
}

impl StrategyKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "random-subset" => StrategyKind::RandomSubset,
            "fastest-tau-first" => StrategyKind::FastestTauFirst,
            "all-ready" => StrategyKind::AllReady,
            "all-at-b" => StrategyKind::AllAtB,
            "never" => StrategyKind::Never,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::RandomSubset => "random-subset",
            StrategyKind::FastestTauFirst => "fastest-tau-first",
            StrategyKind::AllReady => "all-ready",
            StrategyKind::AllAtB => "all-at-b",
            StrategyKind::Never => "never",
        }
    }

    pub fn build(self, seed: u64) -> Box<dyn SyncStrategy> {
        match self {
            StrategyKind::RandomSubset => Box::new(RandomSubset::new(seed)),
            StrategyKind::FastestTauFirst => Box::new(FastestTauFirst),
            StrategyKind::AllReady => Box::new(AllReady),
            StrategyKind::AllAtB | StrategyKind::Never => Box::new(NeverSync),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Vanilla,
    Synchronized,
    Rennala { b: usize },
    Ringmaster { g: usize },
    Local { b: usize },
    Cycle { s: usize },
    AsyncLocal { b: usize, m: usize },
    AsyncBatch { b: usize, m: usize },
    LocalAsync { b: usize, groups: Vec<Vec<usize>> },
    Nested { b: usize, cluster_b: Option<usize>, clusters: Vec<Vec<Vec<usize>>> },
    DualProcess { b: usize },
    MetaLocal { b: usize, strategy: StrategyKind },
    FedAvg { k: usize },
}

/// Splits `0..n` into `parts` contiguous, nearly equal groups.
pub fn even_groups(n: usize, parts: usize) -> Vec<Vec<usize>> {
    let parts = parts.clamp(1, n.max(1));
    (0..parts)
        .map(|p| (p * n / parts..(p + 1) * n / parts).collect())
        .collect()
}

impl Method {
    pub const NAMES: [&'static str; 13] = [
        "vanilla",
        "synchronized",
        "rennala",
        "ringmaster",
        "local",
        "cycle",
        "async-local",
        "async-batch",
        "local-async",
        "nested",
        "dual-process",
        "meta-local",
        "fedavg",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::Synchronized => "synchronized",
            Method::Rennala { .. } => "rennala",
            Method::Ringmaster { .. } => "ringmaster",
            Method::Local { .. } => "local",
            Method::Cycle { .. } => "cycle",
            Method::AsyncLocal { .. } => "async-local",
            Method::AsyncBatch { .. } => "async-batch",
            Method::LocalAsync { .. } => "local-async",
            Method::Nested { .. } => "nested",
            Method::DualProcess { .. } => "dual-process",
            Method::MetaLocal { .. } => "meta-local",
            Method::FedAvg { .. } => "fedavg",
        }
    }

    /// The distance bound promised by the method's analysis on `n` workers.
    pub fn claimed_r(&self, n: usize) -> Option<usize> {
        Some(match self {
            Method::Vanilla => 0,
            Method::Synchronized => n - 1,
            Method::Rennala { b } | Method::Local { b } | Method::DualProcess { b } => b - 1,
            Method::LocalAsync { b, .. } => b - 1,
            Method::Ringmaster { g } => g - 1,
            Method::Cycle { s } => (2 * n * n).div_ceil((*s).min(n)),
            Method::AsyncLocal { b, m } | Method::AsyncBatch { b, m } => b + m - 2,
            Method::Nested { b, .. } | Method::MetaLocal { b, .. } => *b,
            Method::FedAvg { .. } => return None,
        })
    }

    /// Step size from the method's own theorem:
    /// `min{c/L, ε/(4σ²L)}` with the method-specific first term.
    pub fn theorem_step_size(&self, n: usize, l: f64, sigma2: f64, epsilon: f64) -> Result<f64, ProblemError> {
        if !(l > 0.0) || !(epsilon > 0.0) {
            return Err(ProblemError::InvalidParameter("L and epsilon must be positive".into()));
        }
        let nf = n as f64;
        let first = match self {
            Method::Vanilla | Method::Synchronized | Method::FedAvg { .. } => 1.0 / (2.0 * l),
            Method::Rennala { b } | Method::Local { b } | Method::DualProcess { b } => 1.0 / (2.0 * *b as f64 * l),
            Method::Ringmaster { g } => 1.0 / (2.0 * *g as f64 * l),
            Method::Cycle { s } => (*s).min(n) as f64 / (4.0 * nf * nf * l),
            Method::AsyncLocal { b, m } | Method::AsyncBatch { b, m } => 1.0 / (4.0 * (b + m - 1) as f64 * l),
            Method::LocalAsync { b, .. } | Method::Nested { b, .. } | Method::MetaLocal { b, .. } => {
                1.0 / (4.0 * *b as f64 * l)
            }
        };
        Ok(if sigma2 > 0.0 { first.min(epsilon / (4.0 * sigma2 * l)) } else { first })
    }

    pub fn build(&self, gamma: f64, seed: u64) -> Box<dyn Policy> {
        match self.clone() {
            Method::Vanilla => Box::new(Vanilla::new(gamma)),
            Method::Synchronized => Box::new(Synchronized::new(gamma)),
            Method::Rennala { b } => Box::new(Rennala::new(gamma, b)),
            Method::Ringmaster { g } => Box::new(Ringmaster::new(gamma, g)),
            Method::Local { b } => Box::new(Local::new(gamma, b)),
            Method::Cycle { s } => Box::new(Cycle::new(gamma, s)),
            Method::AsyncLocal { b, m } => Box::new(AsyncLocal::new(gamma, b, m, false)),
            Method::AsyncBatch { b, m } => Box::new(AsyncLocal::new(gamma, b, m, true)),
            Method::LocalAsync { b, groups } => Box::new(LocalAsync::new(gamma, b, groups)),
            Method::Nested { b, cluster_b, clusters } => Box::new(Nested::new(gamma, b, cluster_b, clusters)),
            Method::DualProcess { b } => Box::new(DualProcess::new(gamma, b)),
            Method::MetaLocal { b, strategy } => Box::new(MetaLocal::new(gamma, b, strategy.build(seed))),
            Method::FedAvg { k } => Box::new(FedAvg::new(gamma, k)),
        }
    }
}

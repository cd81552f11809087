#![allow(dead_code)]

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use birch::algorithms::{even_groups, Method, StrategyKind};
use birch::problems::{NoiseKind, Problem, QuadraticProblem, StochasticOracle};
use birch::sim::{run, RunOptions, SimOutput, StopCondition};
use birch::timing::TimingModel;
use birch::tree::{verify_conditions, ComputationTree, ConditionReport, GradientLabel, NodeId, SampleId};

/// A random tree on `size` nodes where every edge carries a fresh sample.
pub fn random_tree(rng: &mut ChaCha8Rng, size: usize) -> (ComputationTree, Vec<Option<usize>>, Vec<GradientLabel>) {
    let mut t = ComputationTree::new(vec![0.0]);
    let mut parent = vec![None];
    let mut labels = vec![GradientLabel {
        point: NodeId(0),
        sample: SampleId(u64::MAX),
    }];
    for i in 1..size {
        // bias towards deep trees now and then
        let p = if rng.gen_bool(0.5) { i - 1 } else { rng.gen_range(0..i) };
        let label = GradientLabel {
            point: NodeId(rng.gen_range(0..i)),
            sample: SampleId(i as u64),
        };
        t.extend(NodeId(p), label, vec![0.0]).unwrap();
        parent.push(Some(p));
        labels.push(label);
    }
    (t, parent, labels)
}

/// Root-to-node path by repeated parent lookups.
pub fn brute_path(parent: &[Option<usize>], mut v: usize) -> Vec<usize> {
    let mut p = vec![v];
    while let Some(u) = parent[v] {
        p.push(u);
        v = u;
    }
    p.reverse();
    p
}

/// `(lca, dist)` from full ancestor sets.
pub fn brute_lca_dist(parent: &[Option<usize>], a: usize, b: usize) -> (usize, usize) {
    let pa = brute_path(parent, a);
    let pb = brute_path(parent, b);
    let sb: HashSet<usize> = pb.iter().copied().collect();
    let lca = *pa.iter().rev().find(|v| sb.contains(v)).unwrap();
    let da = pa.len() - 1 - pa.iter().position(|&v| v == lca).unwrap();
    let db = pb.len() - 1 - pb.iter().position(|&v| v == lca).unwrap();
    (lca, da.max(db))
}

pub fn brute_repr(parent: &[Option<usize>], labels: &[GradientLabel], v: usize) -> Vec<GradientLabel> {
    let mut r: Vec<GradientLabel> = brute_path(parent, v)[1..].iter().map(|&u| labels[u]).collect();
    r.sort();
    r
}

/// Per-worker times drawn from `[1, 10]` for compute and `[0, tau_max]`
/// for communication.
pub fn hetero_timing(rng: &mut ChaCha8Rng, n: usize, tau_max: f64) -> TimingModel {
    let h = (0..n).map(|_| rng.gen_range(1.0..10.0)).collect();
    let tau = (0..n)
        .map(|_| if tau_max > 0.0 { rng.gen_range(0.0..tau_max) } else { 0.0 })
        .collect();
    TimingModel::new(h, tau).unwrap()
}

pub fn quadratic() -> Problem {
    Problem::Quadratic(QuadraticProblem::new(0.5, 1.0).unwrap())
}

pub fn run_method(
    method: &Method,
    timing: &TimingModel,
    problem: &Problem,
    noise: NoiseKind,
    gamma: f64,
    seed: u64,
    stop: StopCondition,
) -> SimOutput {
    let mut policy = method.build(gamma, seed);
    let oracle = StochasticOracle::new(noise, seed);
    let x0 = vec![1.0; problem.dim()];
    run(policy.as_mut(), problem, &oracle, timing, x0, RunOptions::new(stop))
        .unwrap_or_else(|e| panic!("{} failed: {e}", method.name()))
}

pub fn audit(method: &Method, n: usize, out: &SimOutput) -> ConditionReport {
    verify_conditions(&out.tree, &out.record, method.claimed_r(n)).unwrap()
}

/// One instance of every tree method with hyperparameters drawn for `n`
/// workers and batch sizes up to `b_max`.
pub fn tree_methods(rng: &mut ChaCha8Rng, n: usize, b_max: usize) -> Vec<Method> {
    let b = rng.gen_range(2..=b_max);
    let m = rng.gen_range(1..=4);
    let groups = rng.gen_range(1..=n.min(3));
    vec![
        Method::Vanilla,
        Method::Rennala { b },
        Method::Ringmaster { g: b },
        Method::Local { b },
        Method::Cycle { s: rng.gen_range(1..=n) },
        Method::AsyncLocal { b, m },
        Method::AsyncBatch { b, m },
        Method::LocalAsync {
            b,
            groups: even_groups(n, groups),
        },
        Method::Nested {
            b,
            cluster_b: if rng.gen_bool(0.5) { Some(rng.gen_range(1..=b)) } else { None },
            clusters: even_groups(n, 2)
                .into_iter()
                .map(|c| {
                    even_groups(c.len(), 2)
                        .into_iter()
                        .map(|g| g.into_iter().map(|i| c[i]).collect())
                        .collect()
                })
                .collect(),
        },
        Method::DualProcess { b },
        Method::MetaLocal {
            b,
            strategy: [
                StrategyKind::RandomSubset,
                StrategyKind::FastestTauFirst,
                StrategyKind::AllReady,
                StrategyKind::AllAtB,
            ][rng.gen_range(0..4)],
        },
    ]
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Worker that produced each main-branch step.
pub fn step_workers(out: &SimOutput) -> Vec<usize> {
    out.record.aux.iter().map(|l| (l.sample.0 >> 40) as usize).collect()
}

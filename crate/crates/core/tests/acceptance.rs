//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines show up in plain `cargo test` output.

mod common;

use std::path::Path;
use std::time::Instant;

use rand::Rng;

use birch::algorithms::{even_groups, Method};
use birch::experiments::{quadratic_race, run_grid, ExperimentConfig, GridResult, RaceOptions};
use birch::problems::{theorem1_iteration_budget, theorem1_step_size, NoiseKind, Problem, ProblemSpec, QuadraticProblem};
use birch::sim::StopCondition;
use birch::timing::{t_dualprocess, t_local, t_local_async, t_rennala, total_time_bound, BoundMethod, TimingModel};
use birch::tree::NodeId;

use common::*;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn tree_oracle() -> Check {
    let mut pairs = 0;
    for seed in 0..1000u64 {
        let size = 1 + (seed as usize * 7919) % 200;
        let mut r = rng(seed);
        let (t, parent, labels) = random_tree(&mut r, size);
        for _ in 0..100 {
            let (a, b) = (r.gen_range(0..size), r.gen_range(0..size));
            let (lca, dist) = brute_lca_dist(&parent, a, b);
            ensure(t.lca(NodeId(a), NodeId(b)).unwrap() == NodeId(lca), || format!("lca tree {seed} ({a},{b})"))?;
            ensure(t.dist(NodeId(a), NodeId(b)).unwrap() == dist, || format!("dist tree {seed} ({a},{b})"))?;
            ensure(t.repr(NodeId(a)).unwrap() == brute_repr(&parent, &labels, a), || format!("repr tree {seed} node {a}"))?;
            pairs += 1;
        }
    }
    Ok(format!("1000 trees, {pairs} pairs"))
}

/// Draws a heterogeneous regime: the two random presets and a continuous one.
fn hetero_regime(seed: u64, n: usize) -> TimingModel {
    let mut r = rng(seed ^ 0xbeef);
    match seed % 3 {
        0 => birch::experiments::regime_preset("hetero-compute", n, seed).unwrap(),
        1 => birch::experiments::regime_preset("hetero-comm", n, seed).unwrap(),
        _ => hetero_timing(&mut r, n, 5.0),
    }
}

/// Returns `(runs, worst fork residual)` and fails on any violation.
fn r_bound_suite() -> Result<(usize, f64), String> {
    let problem = quadratic();
    let mut runs = 0;
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let n = 2 + (seed as usize % 7);
        let timing = hetero_regime(seed, n);
        let mut r = rng(1000 + seed);
        for m in tree_methods(&mut r, n, 32) {
            let out = run_method(&m, &timing, &problem, NoiseKind::Gaussian { sigma2: 1.0 }, 0.01, seed, StopCondition::steps(160));
            let rep = audit(&m, n, &out);
            ensure(rep.containment_holds(), || format!("{} seed {seed}: containment {}", m.name(), rep.summary()))?;
            ensure(rep.within_claim(), || format!("{} seed {seed}: {}", m.name(), rep.summary()))?;
            worst = worst.max(rep.fork_residual_max);
            runs += 1;
        }
    }
    let eq = TimingModel::compute_only(vec![3.0, 3.0]).unwrap();
    for b in [2, 7, 16, 32] {
        let m = Method::Rennala { b };
        let out = run_method(&m, &eq, &problem, NoiseKind::Gaussian { sigma2: 1.0 }, 0.01, 5, StopCondition::steps(3 * b));
        let r_obs = audit(&m, 2, &out).r_observed;
        ensure(r_obs == b - 1, || format!("rennala n=2 B={b}: R={r_obs}"))?;
        runs += 1;
    }
    Ok((runs, worst))
}

fn figure_replays() -> Check {
    let noise = NoiseKind::Gaussian { sigma2: 1.0 };
    let local = Method::Local { b: 4 };
    let t = TimingModel::compute_only(vec![1.0, 1.0]).unwrap();
    let out = run_method(&local, &t, &quadratic(), noise, 0.01, 0, StopCondition::steps(4));
    let w = step_workers(&out);
    let m1 = (w.iter().filter(|&&v| v == 0).count(), w.iter().filter(|&&v| v == 1).count());
    ensure(m1 == (2, 2), || format!("local M = {m1:?}"))?;
    let r1 = audit(&local, 2, &out).r_observed;
    ensure(r1 == 3, || format!("local max dist {r1}"))?;

    let la = Method::LocalAsync {
        b: 5,
        groups: vec![vec![0], vec![1]],
    };
    let t = TimingModel::compute_only(vec![1.0, 1.4]).unwrap();
    let out = run_method(&la, &t, &quadratic(), noise, 0.01, 0, StopCondition::steps(5));
    let w = step_workers(&out);
    let m = (w.iter().filter(|&&v| v == 0).count(), w.iter().filter(|&&v| v == 1).count());
    ensure(m == (3, 2), || format!("local-async m = {m:?}"))?;
    let r2 = audit(&la, 2, &out).r_observed;
    ensure(r2 == 4, || format!("local-async max dist {r2}"))?;
    Ok(format!("local M={m1:?} -> R={r1}, local-async m={m:?} -> R={r2}"))
}

/// Longest simulated time between consecutive multiples of `b` on the main branch.
fn longest_segment(clock: &[(usize, f64)], b: usize, rounds: usize) -> f64 {
    let at = |k: usize| clock.iter().find(|(j, _)| *j >= k).map(|(_, t)| *t).expect("branch reached k");
    (0..rounds).map(|j| at((j + 1) * b) - at(j * b)).fold(0.0, f64::max)
}

fn timing_consistency() -> Check {
    let problem = quadratic();
    let noise = NoiseKind::Gaussian { sigma2: 1.0 };
    let rounds = 4;
    let mut worst = 0.0f64;
    for draw in 0..50u64 {
        let mut r = rng(5000 + draw);
        let n = r.gen_range(1..=8);
        let b = r.gen_range(1..=32);
        let h: Vec<f64> = (0..n).map(|_| r.gen_range(1.0..10.0)).collect();
        let tau: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..20.0)).collect();
        let compute = TimingModel::compute_only(h.clone()).unwrap();
        let with_comm = TimingModel::new(h.clone(), tau.clone()).unwrap();
        let groups = even_groups(n, r.gen_range(1..=n.min(3)));
        let cases = [
            (Method::Rennala { b }, &compute, t_rennala(&h, b).unwrap()),
            (Method::Local { b }, &compute, t_local(&h, b).unwrap()),
            (Method::LocalAsync { b, groups }, &compute, t_local_async(&h, b).unwrap()),
            (Method::DualProcess { b }, &with_comm, 3.0 * t_dualprocess(&h, &tau, b).unwrap()),
        ];
        for (m, timing, bound) in cases {
            let out = run_method(&m, timing, &problem, noise, 0.01, draw, StopCondition::steps(rounds * b));
            let seg = longest_segment(&out.trace.branch_clock, b, rounds);
            ensure(seg <= bound + 1e-9, || format!("{} draw {draw} (n={n}, B={b}): segment {seg} > {bound}", m.name()))?;
            worst = worst.max(seg / bound);
        }
    }
    Ok(format!("50 draws, worst segment/bound = {worst:.3}"))
}

fn race() -> Check {
    let r = quadratic_race(0.01, 1.0, 4, 1.0, 64, &RaceOptions::default()).map_err(|e| e.to_string())?;
    let ratio = r.ratio().ok_or("a method did not reach the target")?;
    let (lo, hi) = (64.0 / 12.0, 3.0 * 64.0 / 4.0);
    ensure((lo..=hi).contains(&ratio), || format!("ratio {ratio} outside [{lo}, {hi}]"))?;
    ensure(r.ringmaster_x_in_range, || "ringmaster x left [0, x0]".into())?;
    Ok(format!(
        "rennala {} / ringmaster {} = {ratio:.3}",
        r.time_rennala.unwrap_or(f64::NAN),
        r.time_ringmaster.unwrap_or(f64::NAN)
    ))
}

fn peak_bandwidth() -> Check {
    let t = TimingModel::uniform(8, 1.0, 1.0).unwrap();
    let stop = StopCondition::time(60.0);
    let noise = NoiseKind::Gaussian { sigma2: 1.0 };
    let mut seen = Vec::new();
    for (m, want) in [
        (Method::Cycle { s: 2 }, 2),
        (Method::Rennala { b: 8 }, 8),
        (Method::Local { b: 8 }, 8),
        (Method::Ringmaster { g: 8 }, 8),
    ] {
        let out = run_method(&m, &t, &quadratic(), noise, 0.01, 0, stop);
        let got = out.trace.peak_bandwidth;
        ensure(got == want, || format!("{} peak {got}, want {want}", m.name()))?;
        seen.push(format!("{}={got}", m.name()));
    }
    Ok(seen.join(" "))
}

fn convergence_budget() -> Check {
    let q = QuadraticProblem::new(0.5, 1.0).unwrap();
    let problem = Problem::Quadratic(q);
    let (sigma2, eps) = (1.0, 0.05);
    let x0 = [1.0, 1.0];
    let delta = problem.value(&x0).unwrap();
    let gamma = theorem1_step_size(q.l, 0, sigma2, eps).unwrap();
    let k = theorem1_iteration_budget(q.l, delta, sigma2, eps, 0).unwrap() as usize;
    let t = TimingModel::compute_only(vec![1.0]).unwrap();
    let mut total = 0.0;
    for seed in 0..20 {
        let out = run_method(&Method::Vanilla, &t, &problem, NoiseKind::Gaussian { sigma2 }, gamma, seed, StopCondition::steps(k));
        let rows: Vec<f64> = out.trace.rows.iter().filter(|r| r.k < k).map(|r| r.grad_norm_sq).collect();
        ensure(rows.len() == k, || format!("seed {seed}: {} rows, want {k}", rows.len()))?;
        total += rows.iter().sum::<f64>() / k as f64;
    }
    let mean = total / 20.0;
    ensure(mean <= 1.2 * eps, || format!("mean {mean} > 1.2·ε"))?;
    Ok(format!("γ={gamma}, K={k}, mean (1/K)Σ‖∇f‖² = {mean:.5} ≤ {}", 1.2 * eps))
}

fn configs_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Per seed, time-to-target of each method's top-1 configuration.
fn top1_times(g: &GridResult, method: &str) -> Vec<f64> {
    let top = g.top1().into_iter().find(|e| e.method == method).expect("method in grid");
    g.rows
        .iter()
        .filter(|r| r.method == method && r.cols == top.cols)
        .map(|r| r.time_to_target.unwrap_or(f64::INFINITY))
        .collect()
}

fn majority_faster(g: &GridResult, fast: &str, slow: &str) -> Result<String, String> {
    let (a, b) = (top1_times(g, fast), top1_times(g, slow));
    let wins = a.iter().zip(&b).filter(|(x, y)| x < y).count();
    ensure(2 * wins > a.len(), || format!("{fast} {a:?} vs {slow} {b:?}"))?;
    Ok(format!("{fast} {a:?} < {slow} {b:?}"))
}

fn regime_ordering() -> Check {
    let slow = ExperimentConfig::load(&configs_dir().join("slow-comm.toml")).map_err(|e| e.to_string())?;
    let g = run_grid(&slow, 1).map_err(|e| e.to_string())?;
    let a = majority_faster(&g, "rennala", "ringmaster")?;
    let b = majority_faster(&g, "local", "ringmaster")?;

    let mut hetero = ExperimentConfig::load(&configs_dir().join("hetero-compute.toml")).map_err(|e| e.to_string())?;
    hetero.methods = vec!["synchronized".into(), "ringmaster".into()];
    let g = run_grid(&hetero, 1).map_err(|e| e.to_string())?;
    let c = majority_faster(&g, "ringmaster", "synchronized")?;
    Ok(format!("slow-comm: {a}; {b}. hetero-compute: {c}"))
}

fn formula_comparison() -> Check {
    let mut r = rng(77);
    let mut strict = 0;
    for i in 0..100 {
        let heavy = i % 2 == 0;
        let n = if heavy { r.gen_range(64..=1024) } else { r.gen_range(1..=1024) };
        let h = r.gen_range(0.1..10.0);
        let tau = r.gen_range(0.01..100.0);
        let eps = 10f64.powf(r.gen_range(-4.0..0.0));
        let ratio = if heavy { 10f64.powf(r.gen_range(3.0..6.0)) } else { 10f64.powf(r.gen_range(-2.0..6.0)) };
        let p = ProblemSpec {
            dimension: 1,
            l: r.gen_range(0.1..10.0),
            f_star: 0.0,
            sigma2: ratio * eps,
            delta: r.gen_range(0.1..10.0),
        };
        let t = TimingModel::uniform(n, h, tau).unwrap();
        let ours = total_time_bound(BoundMethod::Local, &t, &p, eps).unwrap();
        let fed = total_time_bound(BoundMethod::FedavgCanonical, &t, &p, eps).unwrap();
        ensure(ours <= fed, || format!("point {i}: local {ours} > fedavg {fed}"))?;
        if heavy {
            ensure(ours < fed, || format!("point {i}: no strict gap at σ²/ε={ratio:.0}, n={n}"))?;
            strict += 1;
        }
    }
    Ok(format!("100 points, {strict} strict"))
}

fn main() {
    let mut failed = 0;
    let mut report = |name: &str, start: Instant, res: Check| {
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("PASS {name} ({secs:.2}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} ({secs:.2}s): {why}");
            }
        }
    };

    let s = Instant::now();
    report("tree-oracle-equivalence", s, tree_oracle());

    let s = Instant::now();
    let suite = r_bound_suite();
    let suite_time = Instant::now();
    report("r-bound-suite", s, suite.clone().map(|(runs, _)| format!("{runs} runs, 0 violations")));
    report(
        "fork-identity",
        suite_time,
        suite.and_then(|(runs, worst)| {
            ensure(worst <= 1e-9, || format!("max residual {worst:e}"))?;
            Ok(format!("max residual {worst:e} over {runs} traces"))
        }),
    );

    let s = Instant::now();
    report("figure-replays", s, figure_replays());
    let s = Instant::now();
    report("timing-formula-consistency", s, timing_consistency());
    let s = Instant::now();
    report("quadratic-race", s, race());
    let s = Instant::now();
    report("peak-bandwidth", s, peak_bandwidth());
    let s = Instant::now();
    report("convergence-budget", s, convergence_budget());
    let s = Instant::now();
    report("regime-ordering", s, regime_ordering());
    let s = Instant::now();
    report("formula-comparison", s, formula_comparison());

    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

mod common;

use birch::algorithms::{even_groups, Method, StrategyKind};
use birch::problems::NoiseKind;
use birch::sim::{SimOutput, StopCondition};
use birch::timing::TimingModel;
use birch::tree::write_audit;

use common::*;

fn noisy() -> NoiseKind {
    NoiseKind::Gaussian { sigma2: 1.0 }
}

fn same_run(a: &SimOutput, b: &SimOutput) -> bool {
    write_audit(&a.tree, Some(&a.record), None) == write_audit(&b.tree, Some(&b.record), None)
        && a.trace.branch_clock == b.trace.branch_clock
}

#[test]
fn every_method_respects_its_distance_bound() {
    let problem = quadratic();
    for seed in 0..6 {
        let mut r = rng(seed);
        let n = 2 + (seed as usize % 5);
        let timing = hetero_timing(&mut r, n, 3.0);
        for m in tree_methods(&mut r, n, 16) {
            let out = run_method(&m, &timing, &problem, noisy(), 0.01, seed, StopCondition::steps(120));
            let rep = audit(&m, n, &out);
            assert!(rep.containment_holds(), "{} seed {seed}: {}", m.name(), rep.summary());
            assert!(rep.within_claim(), "{} seed {seed}: {}", m.name(), rep.summary());
            assert!(rep.fork_residual_max <= 1e-9, "{}: {}", m.name(), rep.summary());
        }
    }
}

#[test]
fn rennala_reaches_its_bound_with_two_equal_workers() {
    let problem = quadratic();
    let timing = TimingModel::compute_only(vec![1.0, 1.0]).unwrap();
    for b in [2, 5, 8] {
        let m = Method::Rennala { b };
        let out = run_method(&m, &timing, &problem, noisy(), 0.01, 1, StopCondition::steps(4 * b));
        assert_eq!(audit(&m, 2, &out).r_observed, b - 1);
    }
}

#[test]
fn local_sgd_two_workers_batch_four() {
    let m = Method::Local { b: 4 };
    let timing = TimingModel::compute_only(vec![1.0, 1.0]).unwrap();
    let out = run_method(&m, &timing, &quadratic(), noisy(), 0.01, 0, StopCondition::steps(4));
    let w = step_workers(&out);
    assert_eq!(w.iter().filter(|&&v| v == 0).count(), 2);
    assert_eq!(w.iter().filter(|&&v| v == 1).count(), 2);
    assert_eq!(audit(&m, 2, &out).r_observed, 3);
}

#[test]
fn local_async_two_groups_three_and_two_steps() {
    let m = Method::LocalAsync {
        b: 5,
        groups: vec![vec![0], vec![1]],
    };
    let timing = TimingModel::compute_only(vec![1.0, 1.4]).unwrap();
    let out = run_method(&m, &timing, &quadratic(), noisy(), 0.01, 0, StopCondition::steps(5));
    let w = step_workers(&out);
    assert_eq!(w, vec![0, 0, 0, 1, 1]);
    assert_eq!(audit(&m, 2, &out).r_observed, 4);
}

#[test]
fn vanilla_is_a_single_path() {
    let timing = TimingModel::compute_only(vec![1.0, 3.0, 7.0]).unwrap();
    let out = run_method(&Method::Vanilla, &timing, &quadratic(), noisy(), 0.1, 3, StopCondition::steps(40));
    assert_eq!(audit(&Method::Vanilla, 3, &out).r_observed, 0);
    assert_eq!(out.tree.len(), 41);
}

#[test]
fn synchronized_sgd_distance_is_n_minus_one() {
    let timing = TimingModel::new(vec![1.0, 2.0, 5.0], vec![0.5, 0.0, 1.0]).unwrap();
    let m = Method::Synchronized;
    let out = run_method(&m, &timing, &quadratic(), noisy(), 0.05, 2, StopCondition::steps(30));
    assert_eq!(audit(&m, 3, &out).r_observed, 2);
}

#[test]
fn ringmaster_with_one_worker_is_vanilla() {
    let timing = TimingModel::new(vec![2.0], vec![0.0]).unwrap();
    let a = run_method(&Method::Vanilla, &timing, &quadratic(), noisy(), 0.1, 5, StopCondition::steps(30));
    let b = run_method(&Method::Ringmaster { g: 4 }, &timing, &quadratic(), noisy(), 0.1, 5, StopCondition::steps(30));
    assert!(same_run(&a, &b));
}

#[test]
fn rennala_with_unit_batch_on_one_worker_is_vanilla() {
    let timing = TimingModel::compute_only(vec![1.5]).unwrap();
    let a = run_method(&Method::Vanilla, &timing, &quadratic(), noisy(), 0.1, 8, StopCondition::steps(25));
    let b = run_method(&Method::Rennala { b: 1 }, &timing, &quadratic(), noisy(), 0.1, 8, StopCondition::steps(25));
    assert!(same_run(&a, &b));
}

#[test]
fn async_local_with_unit_chain_is_ringmaster() {
    for seed in 0..5 {
        let mut r = rng(100 + seed);
        let timing = hetero_timing(&mut r, 4, 2.0);
        let a = run_method(&Method::Ringmaster { g: 6 }, &timing, &quadratic(), noisy(), 0.05, seed, StopCondition::steps(80));
        let b = run_method(&Method::AsyncLocal { b: 6, m: 1 }, &timing, &quadratic(), noisy(), 0.05, seed, StopCondition::steps(80));
        assert!(same_run(&a, &b), "seed {seed}");
    }
}

#[test]
fn dual_process_without_communication_is_local() {
    for seed in 0..5 {
        let mut r = rng(200 + seed);
        let timing = hetero_timing(&mut r, 3, 0.0);
        let a = run_method(&Method::Local { b: 7 }, &timing, &quadratic(), noisy(), 0.05, seed, StopCondition::steps(70));
        let b = run_method(&Method::DualProcess { b: 7 }, &timing, &quadratic(), noisy(), 0.05, seed, StopCondition::steps(70));
        assert!(same_run(&a, &b), "seed {seed}");
    }
}

#[test]
fn meta_local_with_forced_syncs_only_is_local() {
    for seed in 0..5 {
        let mut r = rng(300 + seed);
        let timing = hetero_timing(&mut r, 4, 2.0);
        let a = run_method(&Method::Local { b: 9 }, &timing, &quadratic(), noisy(), 0.05, seed, StopCondition::steps(90));
        let meta = Method::MetaLocal {
            b: 9,
            strategy: StrategyKind::AllAtB,
        };
        let b = run_method(&meta, &timing, &quadratic(), noisy(), 0.05, seed, StopCondition::steps(90));
        assert!(same_run(&a, &b), "seed {seed}");
    }
}

#[test]
fn nested_with_one_cluster_and_no_cluster_syncs_is_local_async() {
    for seed in 0..5 {
        let mut r = rng(400 + seed);
        let timing = hetero_timing(&mut r, 4, 2.0);
        let groups = even_groups(4, 2);
        let a = run_method(
            &Method::LocalAsync { b: 8, groups: groups.clone() },
            &timing,
            &quadratic(),
            noisy(),
            0.05,
            seed,
            StopCondition::steps(80),
        );
        let nested = Method::Nested {
            b: 8,
            cluster_b: None,
            clusters: vec![groups],
        };
        let b = run_method(&nested, &timing, &quadratic(), noisy(), 0.05, seed, StopCondition::steps(80));
        assert!(same_run(&a, &b), "seed {seed}");
    }
}

#[test]
fn fedavg_reports_iterates_without_a_tree() {
    let timing = TimingModel::uniform(3, 1.0, 0.5).unwrap();
    let out = run_method(&Method::FedAvg { k: 4 }, &timing, &quadratic(), noisy(), 0.05, 0, StopCondition::time(60.0));
    assert!(out.trace.update_count > 0);
    assert!(out.trace.final_loss() < quadratic().value(&[1.0, 1.0]).unwrap());
}

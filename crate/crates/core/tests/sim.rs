use birch::algorithms::{Method, Rennala};
use birch::problems::{NoiseKind, Problem, QuadraticProblem, StochasticOracle};
use birch::sim::{
    measure_peak_bandwidth, run, Gradient, Policy, RunOptions, SimContext, SimError, StopCondition,
};
use birch::timing::TimingModel;

fn quad() -> Problem {
    Problem::Quadratic(QuadraticProblem::new(0.5, 1.0).unwrap())
}

/// Computes once and then never again.
struct Stalls;

impl Policy for Stalls {
    fn name(&self) -> &str {
        "stalls"
    }
    fn gamma(&self) -> f64 {
        0.1
    }
    fn claimed_r(&self) -> Option<usize> {
        None
    }
    fn start(&mut self, ctx: &mut SimContext<'_>) -> Result<(), SimError> {
        let h = ctx.head();
        ctx.compute(0, h, 0)
    }
    fn on_gradient(&mut self, ctx: &mut SimContext<'_>, g: Gradient) -> Result<(), SimError> {
        ctx.extend_main(&g, 1.0)?;
        Ok(())
    }
}

#[test]
fn empty_queue_before_stop_is_a_deadlock() {
    let t = TimingModel::compute_only(vec![1.0]).unwrap();
    let oracle = StochasticOracle::new(NoiseKind::Exact, 0);
    let r = run(&mut Stalls, &quad(), &oracle, &t, vec![1.0, 1.0], RunOptions::new(StopCondition::steps(5)));
    assert_eq!(r.unwrap_err(), SimError::Deadlock { time: 1.0 });
}

#[test]
fn a_stop_condition_is_required() {
    let t = TimingModel::compute_only(vec![1.0]).unwrap();
    let oracle = StochasticOracle::new(NoiseKind::Exact, 0);
    let r = run(&mut Stalls, &quad(), &oracle, &t, vec![1.0, 1.0], RunOptions::new(StopCondition::default()));
    assert_eq!(r.unwrap_err(), SimError::NoStop);
}

#[test]
fn runs_are_deterministic() {
    let t = TimingModel::new(vec![1.0, 2.5, 3.0], vec![0.5, 0.1, 2.0]).unwrap();
    let oracle = StochasticOracle::new(NoiseKind::Gaussian { sigma2: 1.0 }, 11);
    let go = || {
        let mut p = Method::AsyncLocal { b: 5, m: 2 }.build(0.05, 11);
        run(p.as_mut(), &quad(), &oracle, &t, vec![1.0, 1.0], RunOptions::new(StopCondition::time(200.0))).unwrap()
    };
    let (a, b) = (go(), go());
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.record, b.record);
}

#[test]
fn rennala_round_time_with_equal_workers() {
    // 2 workers, 4 gradients each, then an upload and a download of 1s each
    let t = TimingModel::uniform(2, 1.0, 1.0).unwrap();
    let oracle = StochasticOracle::new(NoiseKind::Exact, 0);
    let mut p = Rennala::new(0.1, 8);
    let out = run(&mut p, &quad(), &oracle, &t, vec![1.0, 1.0], RunOptions::new(StopCondition::steps(8))).unwrap();
    assert_eq!(out.trace.time_at_len(8), Some(5.0));
    assert_eq!(measure_peak_bandwidth(&out.trace), 2);
}

#[test]
fn decimated_trace_keeps_the_last_row() {
    let t = TimingModel::compute_only(vec![1.0]).unwrap();
    let oracle = StochasticOracle::new(NoiseKind::Exact, 0);
    let mut p = Method::Vanilla.build(0.1, 0);
    let opts = RunOptions {
        stop: StopCondition::steps(10),
        eval_every: 3,
    };
    let out = run(p.as_mut(), &quad(), &oracle, &t, vec![1.0, 1.0], opts).unwrap();
    let ks: Vec<usize> = out.trace.rows.iter().map(|r| r.k).collect();
    assert_eq!(ks, vec![0, 3, 6, 9, 10]);
}

#[test]
fn csv_and_dat_have_one_line_per_row() {
    let t = TimingModel::compute_only(vec![1.0, 2.0]).unwrap();
    let oracle = StochasticOracle::new(NoiseKind::Exact, 0);
    let mut p = Method::Ringmaster { g: 3 }.build(0.1, 0);
    let out = run(p.as_mut(), &quad(), &oracle, &t, vec![1.0, 1.0], RunOptions::new(StopCondition::time(10.0))).unwrap();
    let rows = out.trace.rows.len();
    assert_eq!(out.trace.to_csv().lines().count(), rows + 1);
    assert_eq!(out.trace.to_dat("x").lines().count(), rows + 2);
    assert!(out.trace.to_csv().starts_with("k,sim_time,grad_norm_sq,loss,comm_inflight\n"));
}

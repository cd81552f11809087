//! Rennala against Ringmaster on `f(x, y) = μx²/2 + Ly²/2` with exact
//! gradients.

use crate::algorithms::{Rennala, Ringmaster};
use crate::problems::{NoiseKind, Problem, QuadraticProblem, StochasticOracle};
use crate::sim::{run, Policy, RunOptions, SimOutput, StopCondition};
use crate::timing::TimingModel;

use super::ExperimentError;

#[derive(Debug, Clone, PartialEq)]
pub struct RaceOptions {
    pub x0: Vec<f64>,
    /// Stop once `f(w) ≤ target`.
    pub target: f64,
    /// Rennala step sizes tried, as exponents `j` of `γ = 2^-j`.
    pub gamma_exponents: std::ops::RangeInclusive<i32>,
    pub max_time: f64,
}

impl Default for RaceOptions {
    fn default() -> Self {
        RaceOptions {
            x0: vec![1.0, 1.0],
            target: 1e-6,
            gamma_exponents: 0..=20,
            max_time: 1e5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaceResult {
    /// Best simulated time over the γ grid; `None` if no γ reached the target.
    pub time_rennala: Option<f64>,
    pub gamma_rennala: Option<f64>,
    pub time_ringmaster: Option<f64>,
    pub gamma_ringmaster: f64,
    /// Rennala step sizes whose runs blew up.
    pub diverged: Vec<f64>,
    pub ringmaster_diverged: bool,
    /// Every main-branch iterate of Ringmaster has `0 ≤ x ≤ x⁰`.
    pub ringmaster_x_in_range: bool,
}

impl RaceResult {
    pub fn ratio(&self) -> Option<f64> {
        Some(self.time_rennala? / self.time_ringmaster?)
    }
}

enum Outcome {
    Reached(f64),
    Diverged,
    TimedOut,
}

fn race_run(
    policy: &mut dyn Policy,
    problem: &Problem,
    timing: &TimingModel,
    opts: &RaceOptions,
    max_time: f64,
    ceiling: f64,
) -> Result<(Outcome, SimOutput), ExperimentError> {
    let oracle = StochasticOracle::new(NoiseKind::Exact, 0);
    let stop = StopCondition {
        max_sim_time: Some(max_time),
        loss_target: Some(opts.target),
        loss_ceiling: Some(ceiling),
        ..Default::default()
    };
    let out = run(policy, problem, &oracle, timing, opts.x0.clone(), RunOptions::new(stop))?;
    let last = out.trace.final_loss();
    let outcome = if !(last <= ceiling) {
        Outcome::Diverged
    } else if let Some(t) = out.trace.time_to_loss(opts.target) {
        Outcome::Reached(t)
    } else {
        Outcome::TimedOut
    };
    Ok((outcome, out))
}

/// Simulated time for each method to reach `f ≤ target` on `n` workers of
/// equal speed `h`. Rennala uses batch `b` and the best `γ = 2^-j`;
/// Ringmaster uses threshold `b` and `γ = 1/(2Ln)`.
pub fn quadratic_race(
    mu: f64,
    l: f64,
    n: usize,
    h: f64,
    b: usize,
    opts: &RaceOptions,
) -> Result<RaceResult, ExperimentError> {
    let problem = Problem::Quadratic(QuadraticProblem::new(mu, l)?);
    let timing = TimingModel::compute_only(vec![h; n])?;
    let f0 = problem.value(&opts.x0)?;
    let ceiling = 10.0 * f0;

    let mut best: Option<(f64, f64)> = None;
    let mut diverged = Vec::new();
    for j in opts.gamma_exponents.clone() {
        let gamma = 2f64.powi(-j);
        // a slower run cannot win, so the current best caps the horizon
        let cap = best.map(|(t, _)| t).unwrap_or(opts.max_time);
        let mut p = Rennala::new(gamma, b);
        match race_run(&mut p, &problem, &timing, opts, cap, ceiling)?.0 {
            Outcome::Reached(t) => {
                if best.map_or(true, |(bt, _)| t < bt) {
                    best = Some((t, gamma));
                }
            }
            Outcome::Diverged => diverged.push(gamma),
            Outcome::TimedOut => {}
        }
    }

    let gamma_ringmaster = 1.0 / (2.0 * l * n as f64);
    let mut rm = Ringmaster::new(gamma_ringmaster, b);
    let (outcome, out) = race_run(&mut rm, &problem, &timing, opts, opts.max_time, ceiling)?;
    let x0 = opts.x0[0];
    let mut in_range = true;
    for &node in &out.record.branch {
        let x = out.tree.coords(node)?[0];
        let (lo, hi) = if x0 >= 0.0 { (0.0, x0) } else { (x0, 0.0) };
        if x < lo || x > hi {
            in_range = false;
        }
    }
    let (time_ringmaster, ringmaster_diverged) = match outcome {
        Outcome::Reached(t) => (Some(t), false),
        Outcome::Diverged => (None, true),
        Outcome::TimedOut => (None, false),
    };
    Ok(RaceResult {
        time_rennala: best.map(|(t, _)| t),
        gamma_rennala: best.map(|(_, g)| g),
        time_ringmaster,
        gamma_ringmaster,
        diverged,
        ringmaster_diverged,
        ringmaster_x_in_range: in_range,
    })
}

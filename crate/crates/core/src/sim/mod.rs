//! Deterministic discrete-event engine. A [`Policy`] schedules gradient
//! computations and transfers through a [`SimContext`]; the engine pops
//! events in `(time, seq)` order and hands completions back to the policy.

mod trace;

pub use trace::{measure_peak_bandwidth, measure_update_frequency, CommEvent, SimTrace, TraceRow};

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::problems::{Problem, ProblemError, StochasticOracle};
use crate::timing::TimingModel;
use crate::tree::{ComputationTree, GradientLabel, MainBranchRecord, NodeId, SampleId, TreeError};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("policy deadlock at t={time}: no runnable event before the stop condition")]
    Deadlock { time: f64 },
    #[error("worker {0} asked to compute while busy")]
    WorkerBusy(usize),
    #[error("no stop condition given")]
    NoStop,
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

/// A finished stochastic gradient computation.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub worker: usize,
    /// Tree node the gradient was taken at; `None` for points outside the tree.
    pub point: Option<NodeId>,
    pub sample: SampleId,
    pub value: Vec<f64>,
    pub tag: u64,
    pub started: f64,
}

impl Gradient {
    pub fn label(&self) -> GradientLabel {
        GradientLabel {
            point: self.point.expect("gradient taken at a tree node"),
            sample: self.sample,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transfer {
    pub worker: usize,
    pub direction: Direction,
    pub payload: usize,
    pub tag: u64,
}

#[derive(Debug)]
enum Point {
    Node(NodeId),
    Free(Vec<f64>),
}

#[derive(Debug)]
enum Kind {
    GradientDone {
        worker: usize,
        point: Point,
        draw: u64,
        tag: u64,
        started: f64,
    },
    TransferDone(Transfer),
    Timer(u64),
}

#[derive(Debug)]
struct Event {
    time: f64,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    // reversed so the max-heap pops the earliest (time, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Any condition that is set and satisfied ends the run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StopCondition {
    pub max_sim_time: Option<f64>,
    pub max_branch_len: Option<usize>,
    /// Running average of `‖∇f(x^k)‖²` over the main branch.
    pub grad_norm_target: Option<f64>,
    pub loss_target: Option<f64>,
    /// Stop once the loss exceeds this value (or is not finite).
    pub loss_ceiling: Option<f64>,
}

impl StopCondition {
    pub fn time(t: f64) -> Self {
        StopCondition {
            max_sim_time: Some(t),
            ..Default::default()
        }
    }

    pub fn steps(k: usize) -> Self {
        StopCondition {
            max_branch_len: Some(k),
            ..Default::default()
        }
    }

    fn is_empty(&self) -> bool {
        self.max_sim_time.is_none()
            && self.max_branch_len.is_none()
            && self.grad_norm_target.is_none()
            && self.loss_target.is_none()
            && self.loss_ceiling.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub stop: StopCondition,
    /// Keep every `eval_every`-th trace row.
    pub eval_every: usize,
}

impl RunOptions {
    pub fn new(stop: StopCondition) -> Self {
        RunOptions { stop, eval_every: 1 }
    }
}

pub trait Policy {
    fn name(&self) -> &str;
    fn gamma(&self) -> f64;
    /// The distance bound the method's analysis promises, if it is a tree method.
    fn claimed_r(&self) -> Option<usize>;
    fn start(&mut self, ctx: &mut SimContext<'_>) -> Result<(), SimError>;
    fn on_gradient(&mut self, ctx: &mut SimContext<'_>, g: Gradient) -> Result<(), SimError>;
    fn on_transfer(&mut self, _ctx: &mut SimContext<'_>, _t: Transfer) -> Result<(), SimError> {
        Ok(())
    }
    fn on_timer(&mut self, _ctx: &mut SimContext<'_>, _tag: u64) -> Result<(), SimError> {
        Ok(())
    }
}

pub struct SimContext<'a> {
    problem: &'a Problem,
    timing: &'a TimingModel,
    gamma: f64,
    now: f64,
    seq: u64,
    queue: BinaryHeap<Event>,
    tree: ComputationTree,
    record: MainBranchRecord,
    trace: SimTrace,
    busy: Vec<bool>,
    draws: Vec<u64>,
    inflight: usize,
    eval_every: usize,
    grad_norm_sum: f64,
    last_loss: f64,
    last_row: TraceRow,
    held: bool,
    published: usize,
}

impl<'a> SimContext<'a> {
    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn n(&self) -> usize {
        self.timing.n()
    }

    pub fn h(&self, w: usize) -> f64 {
        self.timing.h[w]
    }

    pub fn tau(&self, w: usize) -> f64 {
        self.timing.tau[w]
    }

    pub fn timing(&self) -> &TimingModel {
        self.timing
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn tree(&self) -> &ComputationTree {
        &self.tree
    }

    pub fn head(&self) -> NodeId {
        self.record.head()
    }

    pub fn branch_len(&self) -> usize {
        self.record.len()
    }

    pub fn is_busy(&self, w: usize) -> bool {
        self.busy[w]
    }

    fn push(&mut self, delay: f64, kind: Kind) {
        self.seq += 1;
        self.queue.push(Event {
            time: self.now + delay,
            seq: self.seq,
            kind,
        });
    }

    fn start_compute(&mut self, w: usize, point: Point, tag: u64) -> Result<(), SimError> {
        if self.busy[w] {
            return Err(SimError::WorkerBusy(w));
        }
        self.busy[w] = true;
        let draw = self.draws[w];
        self.draws[w] += 1;
        let started = self.now;
        self.push(
            self.timing.h[w],
            Kind::GradientDone {
                worker: w,
                point,
                draw,
                tag,
                started,
            },
        );
        Ok(())
    }

    /// Starts one stochastic gradient at a tree node; it completes after `h_w`.
    pub fn compute(&mut self, w: usize, at: NodeId, tag: u64) -> Result<(), SimError> {
        if !self.tree.contains(at) {
            return Err(TreeError::UnknownNode(at).into());
        }
        self.start_compute(w, Point::Node(at), tag)
    }

    /// Starts one stochastic gradient at a point that is not a tree node.
    pub fn compute_free(&mut self, w: usize, x: Vec<f64>, tag: u64) -> Result<(), SimError> {
        self.start_compute(w, Point::Free(x), tag)
    }

    /// Starts a transfer of `payload` gradients (0 for a model broadcast);
    /// it completes after `tau_w`.
    pub fn send(&mut self, w: usize, direction: Direction, payload: usize, tag: u64) {
        let tau = self.timing.tau[w];
        self.trace.comm_events.push(CommEvent {
            start: self.now,
            end: self.now + tau,
            worker: w,
            direction,
            payload,
        });
        if tau > 0.0 {
            self.inflight += 1;
        }
        self.push(
            tau,
            Kind::TransferDone(Transfer {
                worker: w,
                direction,
                payload,
                tag,
            }),
        );
    }

    pub fn timer(&mut self, delay: f64, tag: u64) {
        self.push(delay, Kind::Timer(tag));
    }

    fn scaled(&self, g: &Gradient, scale: f64) -> Vec<f64> {
        let c = self.gamma * scale;
        g.value.iter().map(|v| c * v).collect()
    }

    /// Appends `head - γ·scale·g` to the main branch, reusing an identical
    /// existing edge below the head.
    pub fn extend_main(&mut self, g: &Gradient, scale: f64) -> Result<NodeId, SimError> {
        let step = self.scaled(g, scale);
        let label = g.label();
        let (node, _) = self.tree.extend_or_reuse(self.record.head(), label, step)?;
        self.record.push(node, label);
        self.trace.update_count += 1;
        let k = self.record.len();
        self.trace.branch_clock.push((k, self.now));
        let x = self.tree.coords(node)?.to_vec();
        self.measure(k, &x)?;
        Ok(node)
    }

    /// Adds `base - γ·g` as an auxiliary node off the main branch.
    pub fn extend_aux(&mut self, base: NodeId, g: &Gradient) -> Result<NodeId, SimError> {
        let step = self.scaled(g, 1.0);
        Ok(self.tree.extend(base, g.label(), step)?)
    }

    /// Like [`extend_aux`](Self::extend_aux) but reuses an identical edge.
    pub fn extend_aux_reuse(&mut self, base: NodeId, g: &Gradient) -> Result<NodeId, SimError> {
        let step = self.scaled(g, 1.0);
        Ok(self.tree.extend_or_reuse(base, g.label(), step)?.0)
    }

    /// Records an ignored gradient as a dead-end leaf below its point.
    pub fn discard(&mut self, g: &Gradient) -> Result<(), SimError> {
        if g.point.is_some() {
            let step = self.scaled(g, 1.0);
            let node = self.tree.extend(g.point.unwrap(), g.label(), step)?;
            self.tree.mark_discarded(node)?;
        }
        self.trace.discarded += 1;
        Ok(())
    }

    /// Flags already-built auxiliary nodes whose gradients never reach the
    /// main branch.
    pub fn discard_nodes(&mut self, nodes: &[NodeId]) -> Result<(), SimError> {
        for &n in nodes {
            self.tree.mark_discarded(n)?;
        }
        self.trace.discarded += nodes.len() as u64;
        Ok(())
    }

    /// For methods whose iterate is not a tree node: records a new iterate.
    pub fn report_iterate(&mut self, x: &[f64]) -> Result<(), SimError> {
        self.trace.update_count += 1;
        let k = self.trace.update_count as usize;
        self.trace.branch_clock.push((k, self.now));
        self.measure(k, x)
    }

    /// Defers trace rows until [`SimContext::publish`]. Used when several
    /// main-branch steps form one model update that no worker sees in part.
    pub fn hold(&mut self) {
        self.held = true;
    }

    /// Ends a [`SimContext::hold`] and records the head as a visible iterate.
    pub fn publish(&mut self) -> Result<(), SimError> {
        self.held = false;
        let k = self.record.len();
        if self.last_row.k != k || self.published == 0 {
            let x = self.tree.coords(self.record.head())?.to_vec();
            self.record_row(k, &x)?;
        }
        Ok(())
    }

    fn measure(&mut self, k: usize, x: &[f64]) -> Result<(), SimError> {
        let g = self.problem.grad_exact(x)?;
        self.grad_norm_sum += g.iter().map(|v| v * v).sum::<f64>();
        if self.held {
            return Ok(());
        }
        self.record_row(k, x)
    }

    fn record_row(&mut self, k: usize, x: &[f64]) -> Result<(), SimError> {
        let loss = self.problem.value(x)?;
        let g = self.problem.grad_exact(x)?;
        let gn: f64 = g.iter().map(|v| v * v).sum();
        self.last_loss = loss;
        self.last_row = TraceRow {
            k,
            sim_time: self.now,
            grad_norm_sq: gn,
            loss,
            comm_inflight: self.inflight,
        };
        if self.published % self.eval_every == 0 {
            self.trace.rows.push(self.last_row);
        }
        self.published += 1;
        Ok(())
    }

    fn should_stop(&self, stop: &StopCondition) -> bool {
        let k = self.trace.update_count as usize;
        if let Some(kmax) = stop.max_branch_len {
            if k >= kmax {
                return true;
            }
        }
        if let Some(t) = stop.grad_norm_target {
            if self.grad_norm_sum / (k + 1) as f64 <= t {
                return true;
            }
        }
        if let Some(t) = stop.loss_target {
            if self.last_loss <= t {
                return true;
            }
        }
        if let Some(c) = stop.loss_ceiling {
            if !(self.last_loss <= c) {
                return true;
            }
        }
        false
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub tree: ComputationTree,
    pub record: MainBranchRecord,
    pub trace: SimTrace,
}

/// Runs `policy` from `x0` until a stop condition holds.
pub fn run(
    policy: &mut dyn Policy,
    problem: &Problem,
    oracle: &StochasticOracle,
    timing: &TimingModel,
    x0: Vec<f64>,
    opts: RunOptions,
) -> Result<SimOutput, SimError> {
    if opts.stop.is_empty() {
        return Err(SimError::NoStop);
    }
    if x0.len() != problem.dim() {
        return Err(ProblemError::DimensionMismatch {
            expected: problem.dim(),
            got: x0.len(),
        }
        .into());
    }
    let n = timing.n();
    let tree = ComputationTree::new(x0.clone());
    let record = MainBranchRecord::new(tree.root());
    let mut ctx = SimContext {
        problem,
        timing,
        gamma: policy.gamma(),
        now: 0.0,
        seq: 0,
        queue: BinaryHeap::new(),
        tree,
        record,
        trace: SimTrace::new(n),
        busy: vec![false; n],
        draws: vec![0; n],
        inflight: 0,
        eval_every: opts.eval_every.max(1),
        grad_norm_sum: 0.0,
        last_loss: f64::INFINITY,
        last_row: TraceRow::default(),
        held: false,
        published: 0,
    };
    ctx.trace.branch_clock.push((0, 0.0));
    ctx.measure(0, &x0)?;
    policy.start(&mut ctx)?;

    while !ctx.should_stop(&opts.stop) {
        let ev = match ctx.queue.pop() {
            Some(ev) => ev,
            None => return Err(SimError::Deadlock { time: ctx.now }),
        };
        if let Some(t) = opts.stop.max_sim_time {
            if ev.time > t {
                ctx.now = t;
                break;
            }
        }
        debug_assert!(ev.time >= ctx.now);
        ctx.now = ev.time;
        match ev.kind {
            Kind::GradientDone {
                worker,
                point,
                draw,
                tag,
                started,
            } => {
                ctx.busy[worker] = false;
                ctx.trace.computed[worker] += 1;
                let (value, sample, point) = match point {
                    Point::Node(id) => {
                        let x = ctx.tree.coords(id)?;
                        let (v, s) = oracle.grad_stochastic(problem, x, worker, draw)?;
                        (v, s, Some(id))
                    }
                    Point::Free(x) => {
                        let (v, s) = oracle.grad_stochastic(problem, &x, worker, draw)?;
                        (v, s, None)
                    }
                };
                let g = Gradient {
                    worker,
                    point,
                    sample,
                    value,
                    tag,
                    started,
                };
                policy.on_gradient(&mut ctx, g)?;
            }
            Kind::TransferDone(t) => {
                if timing.tau[t.worker] > 0.0 {
                    ctx.inflight -= 1;
                }
                policy.on_transfer(&mut ctx, t)?;
            }
            Kind::Timer(tag) => policy.on_timer(&mut ctx, tag)?,
        }
    }

    // keep the last measurement even when decimation skipped it
    if ctx.trace.rows.last().map(|r| r.k) != Some(ctx.last_row.k) {
        let row = ctx.last_row;
        ctx.trace.rows.push(row);
    }
    ctx.trace.final_time = ctx.now;
    ctx.trace.peak_bandwidth = measure_peak_bandwidth(&ctx.trace);
    Ok(SimOutput {
        tree: ctx.tree,
        record: ctx.record,
        trace: ctx.trace,
    })
}

//! Meta Local SGD: workers run local chains and the server synchronizes
//! any subset of them, with a forced sync before any chain could exceed the
//! distance budget `B`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::local::Chains;
use crate::sim::{Direction, Gradient, Policy, SimContext, SimError, Transfer};
use crate::tree::NodeId;

/// What the server sees when deciding on a soft sync.
pub struct SyncView<'a> {
    pub d: &'a [usize],
    pub m: &'a [usize],
    pub tau: &'a [f64],
    pub b: usize,
    /// Worker whose gradient triggered the decision.
    pub trigger: usize,
}

pub enum SyncChoice {
    Wait,
    Sync(Vec<usize>),
}

pub trait SyncStrategy {
    fn choose(&mut self, view: &SyncView<'_>) -> SyncChoice;
}

/// Each worker with a pending gradient joins with probability 1/2.
pub struct RandomSubset(ChaCha8Rng);

impl RandomSubset {
    pub fn new(seed: u64) -> Self {
        RandomSubset(ChaCha8Rng::seed_from_u64(seed))
    }
}

impl SyncStrategy for RandomSubset {
    fn choose(&mut self, v: &SyncView<'_>) -> SyncChoice {
        let s = (0..v.m.len())
            .filter(|&i| v.m[i] > 0)
            .filter(|_| self.0.gen_bool(0.5))
            .collect();
        SyncChoice::Sync(s)
    }
}

/// The ready worker with the cheapest link.
pub struct FastestTauFirst;

impl SyncStrategy for FastestTauFirst {
    fn choose(&mut self, v: &SyncView<'_>) -> SyncChoice {
        let best = (0..v.m.len())
            .filter(|&i| v.m[i] > 0)
            .min_by(|&a, &b| v.tau[a].total_cmp(&v.tau[b]).then(a.cmp(&b)));
        SyncChoice::Sync(best.into_iter().collect())
    }
}

/// Every worker with at least one pending gradient.
pub struct AllReady;

impl SyncStrategy for AllReady {
    fn choose(&mut self, v: &SyncView<'_>) -> SyncChoice {
        SyncChoice::Sync((0..v.m.len()).filter(|&i| v.m[i] > 0).collect())
    }
}

/// Never soft-syncs, so every sync is a forced one: all workers at once when
/// the `B` budget is used up, which is plain Local SGD.
pub struct NeverSync;

impl SyncStrategy for NeverSync {
    fn choose(&mut self, _: &SyncView<'_>) -> SyncChoice {
        SyncChoice::Wait
    }
}

pub struct MetaLocal {
    gamma: f64,
    b: usize,
    strategy: Box<dyn SyncStrategy>,
    chains: Chains,
    d: Vec<usize>,
    // epoch per worker; bumped when the worker is stopped for a sync
    epoch: Vec<u64>,
    ready: Vec<bool>,
    base: Vec<NodeId>,
    syncing: Vec<usize>,
    arrived: usize,
    soft_syncs: u64,
    hard_syncs: u64,
}

impl MetaLocal {
    pub fn new(gamma: f64, b: usize, strategy: Box<dyn SyncStrategy>) -> Self {
        MetaLocal {
            gamma,
            b: b.max(1),
            strategy,
            chains: Chains::default(),
            d: Vec::new(),
            epoch: Vec::new(),
            ready: Vec::new(),
            base: Vec::new(),
            syncing: Vec::new(),
            arrived: 0,
            soft_syncs: 0,
            hard_syncs: 0,
        }
    }

    pub fn sync_counts(&self) -> (u64, u64) {
        (self.soft_syncs, self.hard_syncs)
    }

    fn budget_used(&self) -> usize {
        self.d.iter().copied().max().unwrap_or(0) + self.chains.total()
    }

    fn decide(&mut self, ctx: &mut SimContext<'_>, trigger: usize) {
        if !self.syncing.is_empty() {
            return;
        }
        let n = ctx.n();
        let total = self.chains.total();
        let hard = self.budget_used() >= self.b;
        let s: Vec<usize> = if hard {
            (0..n).filter(|&j| self.d[j] + total >= self.b).collect()
        } else {
            let m: Vec<usize> = (0..n).map(|w| self.chains.len(w)).collect();
            if m.iter().all(|&c| c == 0) {
                return;
            }
            let view = SyncView {
                d: &self.d,
                m: &m,
                tau: &ctx.timing().tau,
                b: self.b,
                trigger,
            };
            match self.strategy.choose(&view) {
                SyncChoice::Wait => return,
                SyncChoice::Sync(s) if s.is_empty() => {
                    let lone = if m[trigger] > 0 {
                        trigger
                    } else {
                        (0..n).find(|&w| m[w] > 0).expect("someone is ready")
                    };
                    vec![lone]
                }
                SyncChoice::Sync(mut s) => {
                    s.sort_unstable();
                    s.dedup();
                    s
                }
            }
        };
        if hard {
            self.hard_syncs += 1;
        } else {
            self.soft_syncs += 1;
        }
        for &j in &s {
            self.epoch[j] += 1;
            self.ready[j] = false;
            ctx.send(j, Direction::Up, self.chains.len(j), self.epoch[j]);
        }
        self.syncing = s;
        self.arrived = 0;
    }
}

impl Policy for MetaLocal {
    fn name(&self) -> &str {
        "meta-local"
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn claimed_r(&self) -> Option<usize> {
        Some(self.b)
    }
    fn start(&mut self, ctx: &mut SimContext<'_>) -> Result<(), SimError> {
        let n = ctx.n();
        self.chains = Chains::new(n);
        self.d = vec![0; n];
        self.epoch = vec![0; n];
        self.ready = vec![true; n];
        self.base = vec![ctx.head(); n];
        for w in 0..n {
            ctx.compute(w, self.base[w], 0)?;
        }
        Ok(())
    }
    fn on_gradient(&mut self, ctx: &mut SimContext<'_>, g: Gradient) -> Result<(), SimError> {
        let w = g.worker;
        if g.tag != self.epoch[w] || !self.ready[w] {
            ctx.discard(&g)?;
            if self.ready[w] {
                ctx.compute(w, self.base[w], self.epoch[w])?;
            }
            return Ok(());
        }
        let mut tip = g.point.expect("tree point");
        if self.budget_used() < self.b {
            tip = self.chains.push(ctx, g)?;
        } else {
            ctx.discard(&g)?;
        }
        self.decide(ctx, w);
        if self.ready[w] {
            ctx.compute(w, tip, self.epoch[w])?;
        }
        Ok(())
    }
    fn on_transfer(&mut self, ctx: &mut SimContext<'_>, t: Transfer) -> Result<(), SimError> {
        let w = t.worker;
        match t.direction {
            Direction::Up => {
                self.arrived += 1;
                if self.arrived < self.syncing.len() {
                    return Ok(());
                }
                let s = std::mem::take(&mut self.syncing);
                let n = ctx.n();
                let take: Vec<usize> = (0..n).map(|v| self.chains.len(v)).collect();
                let moved: usize = s.iter().map(|&j| take[j]).sum();
                self.chains.unroll(ctx, &s, &take)?;
                for v in 0..n {
                    if s.contains(&v) {
                        self.d[v] = 0;
                    } else {
                        self.d[v] += moved;
                    }
                }
                let head = ctx.head();
                for &j in &s {
                    self.base[j] = head;
                    ctx.send(j, Direction::Down, 0, self.epoch[j]);
                }
                self.decide(ctx, w);
            }
            Direction::Down => {
                if t.tag == self.epoch[w] && !self.ready[w] {
                    self.ready[w] = true;
                    if !ctx.is_busy(w) {
                        ctx.compute(w, self.base[w], self.epoch[w])?;
                    }
                }
            }
        }
        Ok(())
    }
}

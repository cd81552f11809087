//! Local SGD and its dual-process variant, which ships partial sums while
//! computing.

use crate::sim::{Direction, Gradient, Policy, SimContext, SimError, Transfer};
use crate::tree::NodeId;

/// Worker-side local chains shared by the round-based local methods.
#[derive(Debug, Default)]
pub(crate) struct Chains {
    pub grads: Vec<Vec<Gradient>>,
    pub nodes: Vec<Vec<NodeId>>,
}

impl Chains {
    pub fn new(n: usize) -> Self {
        Chains {
            grads: vec![Vec::new(); n],
            nodes: vec![Vec::new(); n],
        }
    }

    /// Extends worker `w`'s chain with `g` and returns the new chain tip.
    pub fn push(&mut self, ctx: &mut SimContext<'_>, g: Gradient) -> Result<NodeId, SimError> {
        let w = g.worker;
        let node = ctx.extend_aux(g.point.expect("tree point"), &g)?;
        self.grads[w].push(g);
        self.nodes[w].push(node);
        Ok(node)
    }

    pub fn len(&self, w: usize) -> usize {
        self.grads[w].len()
    }

    pub fn total(&self) -> usize {
        self.grads.iter().map(Vec::len).sum()
    }

    /// Replays the first `take[w]` gradients of each listed worker onto the
    /// main branch in worker order; the rest are flagged as discarded.
    pub fn unroll(
        &mut self,
        ctx: &mut SimContext<'_>,
        workers: &[usize],
        take: &[usize],
    ) -> Result<(), SimError> {
        ctx.hold();
        for &w in workers {
            let grads = std::mem::take(&mut self.grads[w]);
            let nodes = std::mem::take(&mut self.nodes[w]);
            for g in &grads[..take[w]] {
                ctx.extend_main(g, 1.0)?;
            }
            ctx.discard_nodes(&nodes[take[w]..])?;
        }
        ctx.publish()
    }
}

/// Workers run local chains from the last broadcast point; once `B` local
/// steps exist in total, every chain is uploaded and replayed onto the main
/// branch in worker order.
pub struct Local {
    gamma: f64,
    b: usize,
    round: u64,
    collecting: bool,
    chains: Chains,
    arrived: usize,
    base: NodeId,
    ready_round: Vec<u64>,
}

impl Local {
    pub fn new(gamma: f64, b: usize) -> Self {
        Local {
            gamma,
            b: b.max(1),
            round: 0,
            collecting: true,
            chains: Chains::default(),
            arrived: 0,
            base: NodeId(0),
            ready_round: Vec::new(),
        }
    }
}

impl Policy for Local {
    fn name(&self) -> &str {
        "local"
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn claimed_r(&self) -> Option<usize> {
        Some(self.b - 1)
    }
    fn start(&mut self, ctx: &mut SimContext<'_>) -> Result<(), SimError> {
        let n = ctx.n();
        self.chains = Chains::new(n);
        self.ready_round = vec![0; n];
        self.base = ctx.head();
        for w in 0..n {
            ctx.compute(w, self.base, 0)?;
        }
        Ok(())
    }
    fn on_gradient(&mut self, ctx: &mut SimContext<'_>, g: Gradient) -> Result<(), SimError> {
        let w = g.worker;
        if g.tag != self.round || !self.collecting {
            ctx.discard(&g)?;
            if self.ready_round[w] == self.round && self.collecting {
                ctx.compute(w, self.base, self.round)?;
            }
            return Ok(());
        }
        let tip = self.chains.push(ctx, g)?;
        if self.chains.total() == self.b {
            self.collecting = false;
            for v in 0..ctx.n() {
                ctx.send(v, Direction::Up, self.chains.len(v), self.round);
            }
        } else {
            ctx.compute(w, tip, self.round)?;
        }
        Ok(())
    }
    fn on_transfer(&mut self, ctx: &mut SimContext<'_>, t: Transfer) -> Result<(), SimError> {
        match t.direction {
            Direction::Up => {
                self.arrived += 1;
                if self.arrived < ctx.n() {
                    return Ok(());
                }
                let n = ctx.n();
                let take: Vec<usize> = (0..n).map(|w| self.chains.len(w)).collect();
                let all: Vec<usize> = (0..n).collect();
                self.chains.unroll(ctx, &all, &take)?;
                self.arrived = 0;
                self.round += 1;
                self.collecting = true;
                self.base = ctx.head();
                for v in 0..n {
                    ctx.send(v, Direction::Down, 0, self.round);
                }
            }
            Direction::Down => {
                let w = t.worker;
                self.ready_round[w] = t.tag;
                if !ctx.is_busy(w) && t.tag == self.round && self.collecting {
                    ctx.compute(w, self.base, self.round)?;
                }
            }
        }
        Ok(())
    }
}

/// Local SGD where each worker also runs a send process: whenever it is idle
/// and new local gradients exist it ships their sum. The server hands out at
/// most `B` gradient slots per round, so the round closes on exactly `B`.
pub struct DualProcess {
    gamma: f64,
    b: usize,
    round: u64,
    collecting: bool,
    chains: Chains,
    sent: Vec<usize>,
    sending: Vec<bool>,
    reserved: usize,
    received: usize,
    base: NodeId,
    ready_round: Vec<u64>,
}

impl DualProcess {
    pub fn new(gamma: f64, b: usize) -> Self {
        DualProcess {
            gamma,
            b: b.max(1),
            round: 0,
            collecting: true,
            chains: Chains::default(),
            sent: Vec::new(),
            sending: Vec::new(),
            reserved: 0,
            received: 0,
            base: NodeId(0),
            ready_round: Vec::new(),
        }
    }

    fn try_send(&mut self, ctx: &mut SimContext<'_>, w: usize) {
        let fresh = self.chains.len(w) - self.sent[w];
        if self.sending[w] || fresh == 0 || self.reserved == self.b {
            return;
        }
        let k = fresh.min(self.b - self.reserved);
        self.sending[w] = true;
        self.sent[w] += k;
        self.reserved += k;
        ctx.send(w, Direction::Up, k, self.round);
        if self.reserved == self.b {
            // the round's gradients are fixed; stop computing
            self.collecting = false;
        }
    }
}

impl Policy for DualProcess {
    fn name(&self) -> &str {
        "dual-process"
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn claimed_r(&self) -> Option<usize> {
        Some(self.b - 1)
    }
    fn start(&mut self, ctx: &mut SimContext<'_>) -> Result<(), SimError> {
        let n = ctx.n();
        self.chains = Chains::new(n);
        self.sent = vec![0; n];
        self.sending = vec![false; n];
        self.ready_round = vec![0; n];
        self.base = ctx.head();
        for w in 0..n {
            ctx.compute(w, self.base, 0)?;
        }
        Ok(())
    }
    fn on_gradient(&mut self, ctx: &mut SimContext<'_>, g: Gradient) -> Result<(), SimError> {
        let w = g.worker;
        if g.tag != self.round || !self.collecting {
            ctx.discard(&g)?;
            if self.ready_round[w] == self.round && self.collecting {
                ctx.compute(w, self.base, self.round)?;
            }
            return Ok(());
        }
        let tip = self.chains.push(ctx, g)?;
        self.try_send(ctx, w);
        if self.collecting {
            ctx.compute(w, tip, self.round)?;
        }
        Ok(())
    }
    fn on_transfer(&mut self, ctx: &mut SimContext<'_>, t: Transfer) -> Result<(), SimError> {
        let w = t.worker;
        match t.direction {
            Direction::Up => {
                self.sending[w] = false;
                self.received += t.payload;
                if self.received < self.b {
                    self.try_send(ctx, w);
                    return Ok(());
                }
                let n = ctx.n();
                let all: Vec<usize> = (0..n).collect();
                let take = self.sent.clone();
                self.chains.unroll(ctx, &all, &take)?;
                self.sent.iter_mut().for_each(|s| *s = 0);
                self.reserved = 0;
                self.received = 0;
                self.round += 1;
                self.collecting = true;
                self.base = ctx.head();
                for v in 0..n {
                    ctx.send(v, Direction::Down, 0, self.round);
                }
            }
            Direction::Down => {
                self.ready_round[w] = t.tag;
                if !ctx.is_busy(w) && t.tag == self.round && self.collecting {
                    ctx.compute(w, self.base, self.round)?;
                }
            }
        }
        Ok(())
    }
}

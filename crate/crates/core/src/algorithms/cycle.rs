use crate::sim::{Direction, Gradient, Policy, SimContext, SimError, Transfer};
use crate::tree::NodeId;

use super::local::Chains;

/// Lock-step local SGD where only one group of `s` workers talks to the
/// server per iteration, cycling through the groups.
pub struct Cycle {
    gamma: f64,
    s: usize,
    n: usize,
    iteration: usize,
    done: usize,
    chains: Chains,
    tip: Vec<NodeId>,
    syncing: Vec<usize>,
    arrived: usize,
}

impl Cycle {
    pub fn new(gamma: f64, s: usize) -> Self {
        Cycle {
            gamma,
            s: s.max(1),
            n: 0,
            iteration: 0,
            done: 0,
            chains: Chains::default(),
            tip: Vec::new(),
            syncing: Vec::new(),
            arrived: 0,
        }
    }

    fn groups(&self) -> usize {
        self.n.div_ceil(self.s)
    }

    fn group(&self, g: usize) -> Vec<usize> {
        (g * self.s..((g + 1) * self.s).min(self.n)).collect()
    }
}

impl Policy for Cycle {
    fn name(&self) -> &str {
        "cycle"
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn claimed_r(&self) -> Option<usize> {
        if self.n == 0 {
            return None;
        }
        Some((2 * self.n * self.n).div_ceil(self.s.min(self.n)))
    }
    fn start(&mut self, ctx: &mut SimContext<'_>) -> Result<(), SimError> {
        self.n = ctx.n();
        self.s = self.s.min(self.n);
        self.chains = Chains::new(self.n);
        self.tip = vec![ctx.head(); self.n];
        for w in 0..self.n {
            ctx.compute(w, self.tip[w], 0)?;
        }
        Ok(())
    }
    fn on_gradient(&mut self, ctx: &mut SimContext<'_>, g: Gradient) -> Result<(), SimError> {
        let w = g.worker;
        self.tip[w] = self.chains.push(ctx, g)?;
        self.done += 1;
        if self.done < self.n {
            return Ok(());
        }
        // barrier: every worker finished this iteration
        self.done = 0;
        let group = self.group(self.iteration % self.groups());
        self.iteration += 1;
        for &v in &group {
            ctx.send(v, Direction::Up, self.chains.len(v), 0);
        }
        for v in 0..self.n {
            if !group.contains(&v) {
                ctx.compute(v, self.tip[v], 0)?;
            }
        }
        self.syncing = group;
        self.arrived = 0;
        Ok(())
    }
    fn on_transfer(&mut self, ctx: &mut SimContext<'_>, t: Transfer) -> Result<(), SimError> {
        match t.direction {
            Direction::Up => {
                self.arrived += 1;
                if self.arrived < self.syncing.len() {
                    return Ok(());
                }
                let group = std::mem::take(&mut self.syncing);
                let take: Vec<usize> = (0..self.n).map(|v| self.chains.len(v)).collect();
                self.chains.unroll(ctx, &group, &take)?;
                let head = ctx.head();
                for &v in &group {
                    self.tip[v] = head;
                    ctx.send(v, Direction::Down, 0, 0);
                }
            }
            Direction::Down => ctx.compute(t.worker, self.tip[t.worker], 0)?,
        }
        Ok(())
    }
}

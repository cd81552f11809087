use crate::sim::{Direction, Gradient, Policy, SimContext, SimError, Transfer};
use crate::tree::NodeId;

/// Each worker sends the sum of `M` gradients; the server applies the sum
/// when fewer than `B` main-branch steps happened since the worker's start
/// point, and ignores it otherwise. With `batch` set all `M` gradients are
/// taken at the start point instead of along a local chain.
pub struct AsyncLocal {
    gamma: f64,
    b: usize,
    m: usize,
    batch: bool,
    start_k: Vec<usize>,
    start: Vec<NodeId>,
    chain: Vec<Vec<Gradient>>,
    // local chain points built so far (excluding the start point)
    nodes: Vec<Vec<NodeId>>,
}

impl AsyncLocal {
    pub fn new(gamma: f64, b: usize, m: usize, batch: bool) -> Self {
        AsyncLocal {
            gamma,
            b: b.max(1),
            m: m.max(1),
            batch,
            start_k: Vec::new(),
            start: Vec::new(),
            chain: Vec::new(),
            nodes: Vec::new(),
        }
    }
}

impl Policy for AsyncLocal {
    fn name(&self) -> &str {
        if self.batch {
            "async-batch"
        } else {
            "async-local"
        }
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn claimed_r(&self) -> Option<usize> {
        Some(self.b + self.m - 2)
    }
    fn start(&mut self, ctx: &mut SimContext<'_>) -> Result<(), SimError> {
        let n = ctx.n();
        let h = ctx.head();
        self.start_k = vec![0; n];
        self.start = vec![h; n];
        self.chain = vec![Vec::new(); n];
        self.nodes = vec![Vec::new(); n];
        for w in 0..n {
            ctx.compute(w, h, 0)?;
        }
        Ok(())
    }
    fn on_gradient(&mut self, ctx: &mut SimContext<'_>, g: Gradient) -> Result<(), SimError> {
        let w = g.worker;
        let at = g.point.expect("tree point");
        self.chain[w].push(g);
        if self.chain[w].len() == self.m {
            ctx.send(w, Direction::Up, self.m, 0);
            return Ok(());
        }
        let next = if self.batch {
            self.start[w]
        } else {
            // the chain point is only materialized when it is needed
            let g = self.chain[w].last().unwrap();
            let node = ctx.extend_aux(at, g)?;
            self.nodes[w].push(node);
            node
        };
        ctx.compute(w, next, 0)
    }
    fn on_transfer(&mut self, ctx: &mut SimContext<'_>, t: Transfer) -> Result<(), SimError> {
        let w = t.worker;
        match t.direction {
            Direction::Up => {
                let chain = std::mem::take(&mut self.chain[w]);
                let nodes = std::mem::take(&mut self.nodes[w]);
                let delay = ctx.branch_len() - self.start_k[w];
                if delay < self.b {
                    ctx.hold();
                    for g in &chain {
                        ctx.extend_main(g, 1.0)?;
                    }
                    ctx.publish()?;
                } else if self.batch {
                    for g in &chain {
                        ctx.discard(g)?;
                    }
                } else {
                    ctx.discard_nodes(&nodes)?;
                    ctx.discard(chain.last().unwrap())?;
                }
                self.start_k[w] = ctx.branch_len();
                self.start[w] = ctx.head();
                ctx.send(w, Direction::Down, 0, 0);
            }
            Direction::Down => ctx.compute(w, self.start[w], 0)?,
        }
        Ok(())
    }
}

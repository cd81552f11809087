use crate::sim::{Direction, Gradient, Policy, SimContext, SimError, Transfer};
use crate::tree::NodeId;

/// Asynchronous SGD that ignores gradients whose delay reaches `G`.
pub struct Ringmaster {
    gamma: f64,
    g: usize,
    start_k: Vec<usize>,
    point: Vec<NodeId>,
    pending: Vec<Option<Gradient>>,
}

impl Ringmaster {
    pub fn new(gamma: f64, g: usize) -> Self {
        Ringmaster {
            gamma,
            g: g.max(1),
            start_k: Vec::new(),
            point: Vec::new(),
            pending: Vec::new(),
        }
    }
}

impl Policy for Ringmaster {
    fn name(&self) -> &str {
        "ringmaster"
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn claimed_r(&self) -> Option<usize> {
        Some(self.g - 1)
    }
    fn start(&mut self, ctx: &mut SimContext<'_>) -> Result<(), SimError> {
        let n = ctx.n();
        let h = ctx.head();
        self.start_k = vec![0; n];
        self.point = vec![h; n];
        self.pending = vec![None; n];
        for w in 0..n {
            ctx.compute(w, h, 0)?;
        }
        Ok(())
    }
    fn on_gradient(&mut self, ctx: &mut SimContext<'_>, g: Gradient) -> Result<(), SimError> {
        let w = g.worker;
        self.pending[w] = Some(g);
        ctx.send(w, Direction::Up, 1, 0);
        Ok(())
    }
    fn on_transfer(&mut self, ctx: &mut SimContext<'_>, t: Transfer) -> Result<(), SimError> {
        let w = t.worker;
        match t.direction {
            Direction::Up => {
                let g = self.pending[w].take().expect("a gradient was sent");
                let delay = ctx.branch_len() - self.start_k[w];
                if delay < self.g {
                    ctx.extend_main(&g, 1.0)?;
                } else {
                    ctx.discard(&g)?;
                }
                self.start_k[w] = ctx.branch_len();
                self.point[w] = ctx.head();
                ctx.send(w, Direction::Down, 0, 0);
            }
            Direction::Down => ctx.compute(w, self.point[w], 0)?,
        }
        Ok(())
    }
}

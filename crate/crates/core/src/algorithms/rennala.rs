use crate::sim::{Direction, Gradient, Policy, SimContext, SimError, Transfer};

/// Collects exactly `B` gradients taken at the current point, then applies
/// them. Gradients that finish after the batch closed are ignored.
pub struct Rennala {
    gamma: f64,
    b: usize,
    round: u64,
    collecting: bool,
    batch: Vec<Gradient>,
    per_worker: Vec<usize>,
    arrived: usize,
    ready_round: Vec<u64>,
}

impl Rennala {
    pub fn new(gamma: f64, b: usize) -> Self {
        Rennala {
            gamma,
            b: b.max(1),
            round: 0,
            collecting: true,
            batch: Vec::new(),
            per_worker: Vec::new(),
            arrived: 0,
            ready_round: Vec::new(),
        }
    }
}

impl Policy for Rennala {
    fn name(&self) -> &str {
        "rennala"
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn claimed_r(&self) -> Option<usize> {
        Some(self.b - 1)
    }
    fn start(&mut self, ctx: &mut SimContext<'_>) -> Result<(), SimError> {
        self.per_worker = vec![0; ctx.n()];
        self.ready_round = vec![0; ctx.n()];
        let h = ctx.head();
        for w in 0..ctx.n() {
            ctx.compute(w, h, 0)?;
        }
        Ok(())
    }
    fn on_gradient(&mut self, ctx: &mut SimContext<'_>, g: Gradient) -> Result<(), SimError> {
        let w = g.worker;
        if g.tag == self.round && self.collecting {
            let at = g.point.expect("tree point");
            self.per_worker[w] += 1;
            self.batch.push(g);
            if self.batch.len() == self.b {
                self.collecting = false;
                for v in 0..ctx.n() {
                    ctx.send(v, Direction::Up, self.per_worker[v], self.round);
                }
            } else {
                ctx.compute(w, at, self.round)?;
            }
            return Ok(());
        }
        ctx.discard(&g)?;
        if self.ready_round[w] == self.round && self.collecting {
            let h = ctx.head();
            ctx.compute(w, h, self.round)?;
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
                let mut batch = std::mem::take(&mut self.batch);
                batch.sort_by_key(|g| g.worker);
                ctx.hold();
                for g in &batch {
                    ctx.extend_main(g, 1.0)?;
                }
                ctx.publish()?;
                self.arrived = 0;
                self.per_worker.iter_mut().for_each(|c| *c = 0);
                self.round += 1;
                self.collecting = true;
                for v in 0..ctx.n() {
                    ctx.send(v, Direction::Down, 0, self.round);
                }
            }
            Direction::Down => {
                let w = t.worker;
                self.ready_round[w] = t.tag;
                if !ctx.is_busy(w) && t.tag == self.round && self.collecting {
                    let h = ctx.head();
                    ctx.compute(w, h, self.round)?;
                }
            }
        }
        Ok(())
    }
}

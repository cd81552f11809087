//! Vanilla SGD and synchronized minibatch SGD.

use crate::sim::{Direction, Gradient, Policy, SimContext, SimError, Transfer};

/// One worker (worker 0) applying each gradient as soon as it is computed.
pub struct Vanilla {
    gamma: f64,
}

impl Vanilla {
    pub fn new(gamma: f64) -> Self {
        Vanilla { gamma }
    }
}

impl Policy for Vanilla {
    fn name(&self) -> &str {
        "vanilla"
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn claimed_r(&self) -> Option<usize> {
        Some(0)
    }
    fn start(&mut self, ctx: &mut SimContext<'_>) -> Result<(), SimError> {
        let h = ctx.head();
        ctx.compute(0, h, 0)
    }
    fn on_gradient(&mut self, ctx: &mut SimContext<'_>, g: Gradient) -> Result<(), SimError> {
        let x = ctx.extend_main(&g, 1.0)?;
        ctx.compute(0, x, 0)
    }
}

/// Every round all `n` workers compute one gradient at the current point;
/// the average is applied as `n` sequential steps of size `γ/n`.
pub struct Synchronized {
    gamma: f64,
    round: u64,
    batch: Vec<Option<Gradient>>,
    arrived: usize,
}

impl Synchronized {
    pub fn new(gamma: f64) -> Self {
        Synchronized {
            gamma,
            round: 0,
            batch: Vec::new(),
            arrived: 0,
        }
    }
}

impl Policy for Synchronized {
    fn name(&self) -> &str {
        "synchronized"
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn claimed_r(&self) -> Option<usize> {
        Some(self.batch.len().saturating_sub(1))
    }
    fn start(&mut self, ctx: &mut SimContext<'_>) -> Result<(), SimError> {
        self.batch = vec![None; ctx.n()];
        let h = ctx.head();
        for w in 0..ctx.n() {
            ctx.compute(w, h, self.round)?;
        }
        Ok(())
    }
    fn on_gradient(&mut self, ctx: &mut SimContext<'_>, g: Gradient) -> Result<(), SimError> {
        let w = g.worker;
        self.batch[w] = Some(g);
        ctx.send(w, Direction::Up, 1, self.round);
        Ok(())
    }
    fn on_transfer(&mut self, ctx: &mut SimContext<'_>, t: Transfer) -> Result<(), SimError> {
        match t.direction {
            Direction::Up => {
                self.arrived += 1;
                if self.arrived == ctx.n() {
                    let scale = 1.0 / ctx.n() as f64;
                    ctx.hold();
                    for w in 0..ctx.n() {
                        let g = self.batch[w].take().expect("every worker reported");
                        ctx.extend_main(&g, scale)?;
                    }
                    ctx.publish()?;
                    self.arrived = 0;
                    self.round += 1;
                    for w in 0..ctx.n() {
                        ctx.send(w, Direction::Down, 0, self.round);
                    }
                }
            }
            Direction::Down => {
                let h = ctx.head();
                ctx.compute(t.worker, h, self.round)?;
            }
        }
        Ok(())
    }
}

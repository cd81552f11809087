use crate::sim::{Direction, Gradient, Policy, SimContext, SimError, Transfer};

/// Classic FedAvg: `K` local steps per worker, then the server averages the
/// local iterates. Averaging is not a single-gradient step, so the run has
/// no computation tree beyond its root.
pub struct FedAvg {
    gamma: f64,
    k: usize,
    x: Vec<f64>,
    local: Vec<Vec<f64>>,
    steps: Vec<usize>,
    arrived: usize,
    round: u64,
}

impl FedAvg {
    pub fn new(gamma: f64, k: usize) -> Self {
        FedAvg {
            gamma,
            k: k.max(1),
            x: Vec::new(),
            local: Vec::new(),
            steps: Vec::new(),
            arrived: 0,
            round: 0,
        }
    }
}

impl Policy for FedAvg {
    fn name(&self) -> &str {
        "fedavg"
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn claimed_r(&self) -> Option<usize> {
        None
    }
    fn start(&mut self, ctx: &mut SimContext<'_>) -> Result<(), SimError> {
        let n = ctx.n();
        let root = ctx.tree().root();
        self.x = ctx.tree().coords(root)?.to_vec();
        self.local = vec![self.x.clone(); n];
        self.steps = vec![0; n];
        for w in 0..n {
            ctx.compute_free(w, self.x.clone(), 0)?;
        }
        Ok(())
    }
    fn on_gradient(&mut self, ctx: &mut SimContext<'_>, g: Gradient) -> Result<(), SimError> {
        let w = g.worker;
        for (x, v) in self.local[w].iter_mut().zip(&g.value) {
            *x -= self.gamma * v;
        }
        self.steps[w] += 1;
        if self.steps[w] < self.k {
            ctx.compute_free(w, self.local[w].clone(), self.round)
        } else {
            ctx.send(w, Direction::Up, self.k, self.round);
            Ok(())
        }
    }
    fn on_transfer(&mut self, ctx: &mut SimContext<'_>, t: Transfer) -> Result<(), SimError> {
        match t.direction {
            Direction::Up => {
                self.arrived += 1;
                let n = ctx.n();
                if self.arrived < n {
                    return Ok(());
                }
                let d = self.x.len();
                self.x = (0..d)
                    .map(|j| self.local.iter().map(|l| l[j]).sum::<f64>() / n as f64)
                    .collect();
                ctx.report_iterate(&self.x)?;
                self.arrived = 0;
                self.round += 1;
                for w in 0..n {
                    ctx.send(w, Direction::Down, 0, self.round);
                }
            }
            Direction::Down => {
                let w = t.worker;
                self.local[w] = self.x.clone();
                self.steps[w] = 0;
                ctx.compute_free(w, self.x.clone(), self.round)?;
            }
        }
        Ok(())
    }
}

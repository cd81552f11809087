//! Local-Async SGD (asynchronous SGD inside groups, global syncs) and its
//! two-level Nested generalization with cluster-level syncs.

use crate::sim::{Direction, Gradient, Policy, SimContext, SimError, Transfer};
use crate::tree::NodeId;

/// Asynchronous SGD inside each group from the last broadcast point. When
/// the groups hold `B` steps in total, all group chains are uploaded and
/// replayed onto the main branch in group order.
pub struct LocalAsync {
    gamma: f64,
    b: usize,
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
    round: u64,
    collecting: bool,
    chain: Vec<Vec<Gradient>>,
    tip: Vec<NodeId>,
    base: NodeId,
    total: usize,
    arrived: usize,
    ready_round: Vec<u64>,
}

impl LocalAsync {
    /// `groups` must partition the workers `0..n`.
    pub fn new(gamma: f64, b: usize, groups: Vec<Vec<usize>>) -> Self {
        LocalAsync {
            gamma,
            b: b.max(1),
            groups,
            group_of: Vec::new(),
            round: 0,
            collecting: true,
            chain: Vec::new(),
            tip: Vec::new(),
            base: NodeId(0),
            total: 0,
            arrived: 0,
            ready_round: Vec::new(),
        }
    }
}

pub(crate) fn index_groups(groups: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut of = vec![usize::MAX; n];
    for (g, members) in groups.iter().enumerate() {
        for &w in members {
            assert!(w < n && of[w] == usize::MAX, "groups must partition the workers");
            of[w] = g;
        }
    }
    assert!(of.iter().all(|&g| g != usize::MAX), "groups must cover every worker");
    of
}

impl Policy for LocalAsync {
    fn name(&self) -> &str {
        "local-async"
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn claimed_r(&self) -> Option<usize> {
        Some(self.b - 1)
    }
    fn start(&mut self, ctx: &mut SimContext<'_>) -> Result<(), SimError> {
        let n = ctx.n();
        self.group_of = index_groups(&self.groups, n);
        self.base = ctx.head();
        self.chain = vec![Vec::new(); self.groups.len()];
        self.tip = vec![self.base; self.groups.len()];
        self.ready_round = vec![0; n];
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
                let gi = self.group_of[w];
                ctx.compute(w, self.tip[gi], self.round)?;
            }
            return Ok(());
        }
        let gi = self.group_of[w];
        self.tip[gi] = ctx.extend_aux(self.tip[gi], &g)?;
        self.chain[gi].push(g);
        self.total += 1;
        if self.total == self.b {
            self.collecting = false;
            for v in 0..ctx.n() {
                let payload = if self.groups[self.group_of[v]][0] == v {
                    self.chain[self.group_of[v]].len()
                } else {
                    0
                };
                ctx.send(v, Direction::Up, payload, self.round);
            }
        } else {
            ctx.compute(w, self.tip[gi], self.round)?;
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
                ctx.hold();
                for gi in 0..self.groups.len() {
                    for g in std::mem::take(&mut self.chain[gi]) {
                        ctx.extend_main(&g, 1.0)?;
                    }
                }
                ctx.publish()?;
                self.arrived = 0;
                self.total = 0;
                self.round += 1;
                self.collecting = true;
                self.base = ctx.head();
                self.tip.iter_mut().for_each(|t| *t = self.base);
                for v in 0..ctx.n() {
                    ctx.send(v, Direction::Down, 0, self.round);
                }
            }
            Direction::Down => {
                let w = t.worker;
                self.ready_round[w] = t.tag;
                if !ctx.is_busy(w) && t.tag == self.round && self.collecting {
                    ctx.compute(w, self.tip[self.group_of[w]], self.round)?;
                }
            }
        }
        Ok(())
    }
}

/// Clusters of groups. Groups run asynchronous SGD from their cluster's
/// point; a cluster folds its group chains into its own chain after
/// `cluster_b` steps (free, fast in-cluster links); the global sync after
/// `B` steps in total replays every cluster chain onto the main branch.
pub struct Nested {
    gamma: f64,
    b: usize,
    cluster_b: Option<usize>,
    clusters: Vec<Vec<Vec<usize>>>,
    // worker -> (cluster, group)
    place: Vec<(usize, usize)>,
    round: u64,
    collecting: bool,
    epoch: Vec<u64>,
    cluster_chain: Vec<Vec<Gradient>>,
    cluster_tip: Vec<NodeId>,
    cluster_steps: Vec<usize>,
    chain: Vec<Vec<Vec<Gradient>>>,
    tip: Vec<Vec<NodeId>>,
    total: usize,
    arrived: usize,
    ready_round: Vec<u64>,
    cluster_syncs: u64,
}

impl Nested {
    pub fn new(gamma: f64, b: usize, cluster_b: Option<usize>, clusters: Vec<Vec<Vec<usize>>>) -> Self {
        Nested {
            gamma,
            b: b.max(1),
            cluster_b: cluster_b.map(|v| v.max(1)),
            clusters,
            place: Vec::new(),
            round: 0,
            collecting: true,
            epoch: Vec::new(),
            cluster_chain: Vec::new(),
            cluster_tip: Vec::new(),
            cluster_steps: Vec::new(),
            chain: Vec::new(),
            tip: Vec::new(),
            total: 0,
            arrived: 0,
            ready_round: Vec::new(),
            cluster_syncs: 0,
        }
    }

    pub fn cluster_syncs(&self) -> u64 {
        self.cluster_syncs
    }

    // round in the high bits, cluster epoch in the low bits
    fn tag(&self, c: usize) -> u64 {
        (self.round << 32) | self.epoch[c]
    }

    fn cluster_sync(&mut self, ctx: &mut SimContext<'_>, c: usize) -> Result<(), SimError> {
        for gi in 0..self.clusters[c].len() {
            for g in std::mem::take(&mut self.chain[c][gi]) {
                self.cluster_tip[c] = ctx.extend_aux_reuse(self.cluster_tip[c], &g)?;
                self.cluster_chain[c].push(g);
            }
        }
        let tip = self.cluster_tip[c];
        self.tip[c].iter_mut().for_each(|t| *t = tip);
        self.cluster_steps[c] = 0;
        self.epoch[c] += 1;
        self.cluster_syncs += 1;
        let tag = self.tag(c);
        for group in self.clusters[c].clone() {
            for w in group {
                if !ctx.is_busy(w) {
                    ctx.compute(w, tip, tag)?;
                }
            }
        }
        Ok(())
    }
}

impl Policy for Nested {
    fn name(&self) -> &str {
        "nested"
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn claimed_r(&self) -> Option<usize> {
        Some(self.b)
    }
    fn start(&mut self, ctx: &mut SimContext<'_>) -> Result<(), SimError> {
        let n = ctx.n();
        let mut place = vec![(usize::MAX, usize::MAX); n];
        for (c, groups) in self.clusters.iter().enumerate() {
            for (g, members) in groups.iter().enumerate() {
                for &w in members {
                    assert!(w < n && place[w].0 == usize::MAX, "clusters must partition the workers");
                    place[w] = (c, g);
                }
            }
        }
        assert!(place.iter().all(|p| p.0 != usize::MAX), "clusters must cover every worker");
        self.place = place;
        let base = ctx.head();
        let k = self.clusters.len();
        self.epoch = vec![0; k];
        self.cluster_chain = vec![Vec::new(); k];
        self.cluster_tip = vec![base; k];
        self.cluster_steps = vec![0; k];
        self.chain = self.clusters.iter().map(|g| vec![Vec::new(); g.len()]).collect();
        self.tip = self.clusters.iter().map(|g| vec![base; g.len()]).collect();
        self.ready_round = vec![0; n];
        for w in 0..n {
            ctx.compute(w, base, 0)?;
        }
        Ok(())
    }
    fn on_gradient(&mut self, ctx: &mut SimContext<'_>, g: Gradient) -> Result<(), SimError> {
        let w = g.worker;
        let (c, gi) = self.place[w];
        if g.tag != self.tag(c) || !self.collecting {
            ctx.discard(&g)?;
            if self.ready_round[w] == self.round && self.collecting {
                let tag = self.tag(c);
                ctx.compute(w, self.tip[c][gi], tag)?;
            }
            return Ok(());
        }
        self.tip[c][gi] = ctx.extend_aux(self.tip[c][gi], &g)?;
        self.chain[c][gi].push(g);
        self.total += 1;
        self.cluster_steps[c] += 1;
        if self.total == self.b {
            self.collecting = false;
            for v in 0..ctx.n() {
                ctx.send(v, Direction::Up, 0, self.round);
            }
        } else if Some(self.cluster_steps[c]) == self.cluster_b {
            self.cluster_sync(ctx, c)?;
        } else {
            let tag = self.tag(c);
            ctx.compute(w, self.tip[c][gi], tag)?;
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
                ctx.hold();
                for c in 0..self.clusters.len() {
                    for g in std::mem::take(&mut self.cluster_chain[c]) {
                        ctx.extend_main(&g, 1.0)?;
                    }
                    for gi in 0..self.clusters[c].len() {
                        for g in std::mem::take(&mut self.chain[c][gi]) {
                            ctx.extend_main(&g, 1.0)?;
                        }
                    }
                }
                ctx.publish()?;
                self.arrived = 0;
                self.total = 0;
                self.round += 1;
                self.collecting = true;
                let base = ctx.head();
                for c in 0..self.clusters.len() {
                    self.cluster_tip[c] = base;
                    self.cluster_steps[c] = 0;
                    self.tip[c].iter_mut().for_each(|t| *t = base);
                }
                for v in 0..ctx.n() {
                    ctx.send(v, Direction::Down, 0, self.round);
                }
            }
            Direction::Down => {
                let w = t.worker;
                self.ready_round[w] = t.tag;
                let (c, gi) = self.place[w];
                if !ctx.is_busy(w) && t.tag == self.round && self.collecting {
                    let tag = self.tag(c);
                    ctx.compute(w, self.tip[c][gi], tag)?;
                }
            }
        }
        Ok(())
    }
}

use std::fmt::Write as _;

use super::Direction;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommEvent {
    pub start: f64,
    pub end: f64,
    pub worker: usize,
    pub direction: Direction,
    pub payload: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub sim_time: f64,
    pub grad_norm_sq: f64,
    pub loss: f64,
    pub comm_inflight: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    /// `(k, time x^k appeared)`, starting with `(0, 0)`.
    pub branch_clock: Vec<(usize, f64)>,
    pub rows: Vec<TraceRow>,
    pub comm_events: Vec<CommEvent>,
    pub discarded: u64,
    pub update_count: u64,
    pub peak_bandwidth: usize,
    pub final_time: f64,
    /// Gradients each worker finished computing.
    pub computed: Vec<u64>,
}

impl SimTrace {
    pub fn new(n: usize) -> Self {
        SimTrace {
            branch_clock: Vec::new(),
            rows: Vec::new(),
            comm_events: Vec::new(),
            discarded: 0,
            update_count: 0,
            peak_bandwidth: 0,
            final_time: 0.0,
            computed: vec![0; n],
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,sim_time,grad_norm_sq,loss,comm_inflight\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.k, r.sim_time, r.grad_norm_sq, r.loss, r.comm_inflight
            );
        }
        s
    }

    /// gnuplot-friendly `sim_time loss` columns.
    pub fn to_dat(&self, title: &str) -> String {
        let mut s = format!("# {title}\n# sim_time loss grad_norm_sq\n");
        for r in &self.rows {
            let _ = writeln!(s, "{} {} {}", r.sim_time, r.loss, r.grad_norm_sq);
        }
        s
    }

    pub fn summary(&self) -> String {
        format!(
            "final_time: {}\nupdates: {}\npeak_bandwidth: {}\ndiscarded: {}\n",
            self.final_time, self.update_count, self.peak_bandwidth, self.discarded
        )
    }

    /// First time the recorded loss is at or below `target`.
    pub fn time_to_loss(&self, target: f64) -> Option<f64> {
        self.rows.iter().find(|r| r.loss <= target).map(|r| r.sim_time)
    }

    pub fn final_loss(&self) -> f64 {
        self.rows.last().map(|r| r.loss).unwrap_or(f64::NAN)
    }

    /// Time the branch first reached length `k`.
    pub fn time_at_len(&self, k: usize) -> Option<f64> {
        self.branch_clock.iter().find(|(j, _)| *j >= k).map(|(_, t)| *t)
    }
}

/// Maximum number of transfers in flight at once. Zero-length transfers
/// occupy no link and are not counted.
pub fn measure_peak_bandwidth(trace: &SimTrace) -> usize {
    let mut pts: Vec<(f64, i32)> = Vec::new();
    for e in &trace.comm_events {
        if e.end > e.start {
            pts.push((e.start, 1));
            pts.push((e.end, -1));
        }
    }
    // an interval ending at t does not overlap one starting at t
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (mut cur, mut peak) = (0i32, 0i32);
    for (_, d) in pts {
        cur += d;
        peak = peak.max(cur);
    }
    peak as usize
}

/// Main-branch extensions per simulated second.
pub fn measure_update_frequency(trace: &SimTrace) -> f64 {
    if trace.final_time > 0.0 {
        trace.update_count as f64 / trace.final_time
    } else {
        0.0
    }
}

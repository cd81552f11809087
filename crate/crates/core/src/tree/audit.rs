//! Checks a main branch against the containment and distance conditions and
//! measures the fork identity residual at every step.

use std::collections::HashMap;

use super::{ComputationTree, GradientLabel, MainBranchRecord, TreeError};

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    /// `dist(x^k, z^k)` for every step `k`.
    pub per_step_dist: Vec<usize>,
    pub r_observed: usize,
    pub claimed_r: Option<usize>,
    /// Steps where `repr(z^k)` is not contained in `repr(x^k)`.
    pub containment_violations: Vec<usize>,
    /// Norm of `(x^k - z^k) + sum of the steps z^k has not seen`, NaN where
    /// containment fails.
    pub fork_residuals: Vec<f64>,
    pub fork_residual_max: f64,
}

impl ConditionReport {
    pub fn within_claim(&self) -> bool {
        self.claimed_r.map_or(true, |r| self.r_observed <= r)
    }

    pub fn containment_holds(&self) -> bool {
        self.containment_violations.is_empty()
    }

    pub fn summary(&self) -> String {
        format!(
            "steps={} r_observed={} claimed_r={} within_claim={} containment_violations={} fork_residual_max={:e}\n",
            self.per_step_dist.len(),
            self.r_observed,
            self.claimed_r.map_or("none".to_string(), |r| r.to_string()),
            self.within_claim(),
            self.containment_violations.len(),
            self.fork_residual_max
        )
    }
}

fn check_branch(tree: &ComputationTree, rec: &MainBranchRecord) -> Result<(), TreeError> {
    let bad = |step: usize, reason: String| TreeError::BadBranch { step, reason };
    if rec.branch.first() != Some(&tree.root()) {
        return Err(bad(0, "branch does not start at the root".into()));
    }
    if rec.branch.len() != rec.aux.len() + 1 {
        return Err(bad(0, "branch and auxiliary sequence lengths differ".into()));
    }
    for (k, pair) in rec.branch.windows(2).enumerate() {
        if tree.parent(pair[1]) != Some(pair[0]) {
            return Err(bad(k, format!("{} is not a child of {}", pair[1], pair[0])));
        }
        if tree.label(pair[1]) != Some(rec.aux[k]) {
            return Err(bad(k, "auxiliary label does not match the edge".into()));
        }
    }
    Ok(())
}

/// Audits every step of the main branch.
pub fn verify_conditions(
    tree: &ComputationTree,
    rec: &MainBranchRecord,
    claimed_r: Option<usize>,
) -> Result<ConditionReport, TreeError> {
    check_branch(tree, rec)?;
    let steps = rec.aux.len();
    let mut per_step_dist = Vec::with_capacity(steps);
    let mut containment_violations = Vec::new();
    let mut fork_residuals = Vec::with_capacity(steps);
    let mut fork_residual_max = 0.0f64;

    for k in 0..steps {
        let x = rec.branch[k];
        let z = rec.aux[k].point;
        let p = tree.lca(x, z)?;
        let dp = tree.depth(p)?;
        per_step_dist.push(tree.dist(x, z)?);

        let z_labels = tree.path_labels(p, z)?;
        let mut unseen: HashMap<GradientLabel, usize> = HashMap::new();
        for j in dp..k {
            *unseen.entry(rec.aux[j]).or_default() += 1;
        }
        let mut contained = true;
        for l in &z_labels {
            match unseen.get_mut(l) {
                Some(c) if *c > 0 => *c -= 1,
                _ => {
                    contained = false;
                    break;
                }
            }
        }
        if !contained {
            containment_violations.push(k);
            fork_residuals.push(f64::NAN);
            continue;
        }

        // x^k - z^k should equal minus the main-branch steps z^k lacks
        let mut diff: Vec<f64> = tree
            .coords(x)?
            .iter()
            .zip(tree.coords(z)?)
            .map(|(a, b)| a - b)
            .collect();
        for j in dp..k {
            let c = unseen.get_mut(&rec.aux[j]).expect("counted above");
            if *c > 0 {
                *c -= 1;
                for (d, s) in diff.iter_mut().zip(tree.step(rec.branch[j + 1])?) {
                    *d += s;
                }
            }
        }
        let r = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
        fork_residual_max = fork_residual_max.max(r);
        fork_residuals.push(r);
    }

    Ok(ConditionReport {
        r_observed: per_step_dist.iter().copied().max().unwrap_or(0),
        per_step_dist,
        claimed_r,
        containment_violations,
        fork_residuals,
        fork_residual_max,
    })
}

//! Plain-text tree format. One line per node:
//! `node_id parent_id grad_point_id sample_id step...`, where the root line
//! reads `0 -1 -1 -1 x0...` and carries the initial point instead of a step.
//! Lines starting with `#` hold optional metadata (`#branch`, `#discarded`,
//! `#claimed_r`) or comments.

use std::fmt::Write as _;

use super::{ComputationTree, GradientLabel, MainBranchRecord, NodeId, SampleId, TreeError};

#[derive(Debug, Clone)]
pub struct AuditFile {
    pub tree: ComputationTree,
    pub branch: Option<MainBranchRecord>,
    pub claimed_r: Option<usize>,
}

fn join(v: &[f64]) -> String {
    let mut s = String::new();
    for x in v {
        let _ = write!(s, " {x}");
    }
    s
}

pub fn write_audit(
    tree: &ComputationTree,
    branch: Option<&MainBranchRecord>,
    claimed_r: Option<usize>,
) -> String {
    let mut out = String::new();
    let root = tree.root();
    let _ = writeln!(out, "0 -1 -1 -1{}", join(tree.coords(root).unwrap()));
    for id in tree.node_ids().skip(1) {
        let l = tree.label(id).unwrap();
        let _ = writeln!(
            out,
            "{} {} {} {}{}",
            id.0,
            tree.parent(id).unwrap().0,
            l.point.0,
            l.sample.0,
            join(tree.step(id).unwrap())
        );
    }
    let discarded: Vec<String> = tree
        .node_ids()
        .filter(|&n| tree.is_discarded(n))
        .map(|n| n.0.to_string())
        .collect();
    if !discarded.is_empty() {
        let _ = writeln!(out, "#discarded {}", discarded.join(" "));
    }
    if let Some(b) = branch {
        let ids: Vec<String> = b.branch.iter().map(|n| n.0.to_string()).collect();
        let _ = writeln!(out, "#branch {}", ids.join(" "));
    }
    if let Some(r) = claimed_r {
        let _ = writeln!(out, "#claimed_r {r}");
    }
    out
}

fn perr(line: usize, reason: impl Into<String>) -> TreeError {
    TreeError::Parse {
        line,
        reason: reason.into(),
    }
}

fn ints<T: std::str::FromStr>(line: usize, it: std::str::SplitWhitespace<'_>) -> Result<Vec<T>, TreeError> {
    it.map(|t| t.parse::<T>().map_err(|_| perr(line, format!("bad integer `{t}`"))))
        .collect()
}

pub fn read_audit(text: &str) -> Result<AuditFile, TreeError> {
    let mut tree: Option<ComputationTree> = None;
    let mut branch_ids: Option<Vec<usize>> = None;
    let mut discarded = Vec::new();
    let mut claimed_r = None;

    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let mut it = meta.split_whitespace();
            match it.next() {
                Some("branch") => branch_ids = Some(ints(ln, it)?),
                Some("discarded") => discarded.extend(ints::<usize>(ln, it)?),
                Some("claimed_r") => {
                    let v: Vec<usize> = ints(ln, it)?;
                    claimed_r = v.first().copied();
                }
                _ => {}
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 4 {
            return Err(perr(ln, "expected at least four fields"));
        }
        let int = |s: &str| s.parse::<i64>().map_err(|_| perr(ln, format!("bad integer `{s}`")));
        let id = int(fields[0])?;
        let parent = int(fields[1])?;
        let point = int(fields[2])?;
        let sample = fields[3]
            .parse::<i128>()
            .map_err(|_| perr(ln, format!("bad sample id `{}`", fields[3])))?;
        let vals = fields[4..]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| perr(ln, format!("bad number `{s}`"))))
            .collect::<Result<Vec<f64>, _>>()?;
        match tree.as_mut() {
            None => {
                if id != 0 || parent != -1 {
                    return Err(perr(ln, "first node must be the root `0 -1 -1 -1`"));
                }
                tree = Some(ComputationTree::new(vals));
            }
            Some(t) => {
                if id < 0 || id as usize != t.len() {
                    return Err(perr(ln, "node ids must be consecutive"));
                }
                if parent < 0 || point < 0 || sample < 0 {
                    return Err(perr(ln, "only the root may have parent -1"));
                }
                let label = GradientLabel {
                    point: NodeId(point as usize),
                    sample: SampleId(sample as u64),
                };
                t.extend(NodeId(parent as usize), label, vals)
                    .map_err(|e| perr(ln, e.to_string()))?;
            }
        }
    }
    let mut tree = tree.ok_or_else(|| perr(0, "empty tree"))?;
    for d in discarded {
        tree.mark_discarded(NodeId(d))?;
    }
    let branch = match branch_ids {
        None => None,
        Some(ids) => {
            let mut rec = MainBranchRecord::new(tree.root());
            for &id in ids.iter().skip(1) {
                let n = NodeId(id);
                let l = tree.label(n).ok_or(TreeError::UnknownNode(n))?;
                rec.push(n, l);
            }
            Some(rec)
        }
    };
    Ok(AuditFile {
        tree,
        branch,
        claimed_r,
    })
}

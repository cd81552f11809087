//! Computation trees: every iterate is a node, every edge is one stochastic
//! gradient step `w_child = w_parent - step` labelled by the point the gradient
//! was taken at and the sample that was drawn.

mod audit;
mod text;

pub use audit::{verify_conditions, ConditionReport};
pub use text::{read_audit, write_audit, AuditFile};

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{}", self.0)
    }
}

/// Identifies one draw of the stochastic oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SampleId(pub u64);

impl SampleId {
    /// Packs a worker index and that worker's draw counter.
    pub fn from_draw(worker: usize, draw: u64) -> Self {
        SampleId(((worker as u64) << 40) | (draw & ((1 << 40) - 1)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GradientLabel {
    pub point: NodeId,
    pub sample: SampleId,
}

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("sample {sample:?} already labels an edge on the path to {base}")]
    DuplicateSample { sample: SampleId, base: NodeId },
    #[error("step has dimension {got}, tree has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("main branch is inconsistent at step {step}: {reason}")]
    BadBranch { step: usize, reason: String },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone)]
struct Node {
    parent: Option<(NodeId, GradientLabel)>,
    depth: usize,
    step: Vec<f64>,
    coords: Vec<f64>,
    discarded: bool,
}

#[derive(Debug, Clone)]
pub struct ComputationTree {
    dim: usize,
    nodes: Vec<Node>,
    children: HashMap<(NodeId, SampleId), NodeId>,
    // every edge that carries a given sample, identified by its child node
    sample_edges: HashMap<SampleId, Vec<NodeId>>,
}

impl ComputationTree {
    pub fn new(root: Vec<f64>) -> Self {
        let dim = root.len();
        ComputationTree {
            dim,
            nodes: vec![Node {
                parent: None,
                depth: 0,
                step: vec![0.0; dim],
                coords: root,
                discarded: false,
            }],
            children: HashMap::new(),
            sample_edges: HashMap::new(),
        }
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.0 < self.nodes.len()
    }

    fn node(&self, id: NodeId) -> Result<&Node, TreeError> {
        self.nodes.get(id.0).ok_or(TreeError::UnknownNode(id))
    }

    /// Adds the child `base - step` reached with gradient `label`.
    ///
    /// A sample may label several edges (local methods replay a worker's
    /// gradients onto the main branch), but never two edges on one root path.
    pub fn extend(
        &mut self,
        base: NodeId,
        label: GradientLabel,
        step: Vec<f64>,
    ) -> Result<NodeId, TreeError> {
        let depth = self.node(base)?.depth + 1;
        self.node(label.point)?;
        if step.len() != self.dim {
            return Err(TreeError::DimensionMismatch {
                expected: self.dim,
                got: step.len(),
            });
        }
        if self.sample_on_path(label.sample, base) {
            return Err(TreeError::DuplicateSample {
                sample: label.sample,
                base,
            });
        }
        let coords = self.nodes[base.0]
            .coords
            .iter()
            .zip(&step)
            .map(|(x, s)| x - s)
            .collect();
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            parent: Some((base, label)),
            depth,
            step,
            coords,
            discarded: false,
        });
        self.children.entry((base, label.sample)).or_insert(id);
        self.sample_edges.entry(label.sample).or_default().push(id);
        Ok(id)
    }

    /// Like [`extend`](Self::extend), but returns the existing child when
    /// `base` already has an edge with this label. Returns `(node, reused)`.
    pub fn extend_or_reuse(
        &mut self,
        base: NodeId,
        label: GradientLabel,
        step: Vec<f64>,
    ) -> Result<(NodeId, bool), TreeError> {
        if let Some(&child) = self.children.get(&(base, label.sample)) {
            if self.nodes[child.0].parent.map(|p| p.1) == Some(label) {
                return Ok((child, true));
            }
        }
        self.extend(base, label, step).map(|id| (id, false))
    }

    fn sample_on_path(&self, sample: SampleId, base: NodeId) -> bool {
        match self.sample_edges.get(&sample) {
            None => false,
            Some(edges) => edges.iter().any(|&c| self.is_ancestor(c, base)),
        }
    }

    pub fn mark_discarded(&mut self, id: NodeId) -> Result<(), TreeError> {
        self.node(id)?;
        self.nodes[id.0].discarded = true;
        Ok(())
    }

    pub fn is_discarded(&self, id: NodeId) -> bool {
        self.nodes.get(id.0).map(|n| n.discarded).unwrap_or(false)
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes.get(id.0).and_then(|n| n.parent.map(|p| p.0))
    }

    pub fn label(&self, id: NodeId) -> Option<GradientLabel> {
        self.nodes.get(id.0).and_then(|n| n.parent.map(|p| p.1))
    }

    pub fn depth(&self, id: NodeId) -> Result<usize, TreeError> {
        Ok(self.node(id)?.depth)
    }

    pub fn coords(&self, id: NodeId) -> Result<&[f64], TreeError> {
        Ok(&self.node(id)?.coords)
    }

    pub fn step(&self, id: NodeId) -> Result<&[f64], TreeError> {
        Ok(&self.node(id)?.step)
    }

    pub fn child_with_label(&self, base: NodeId, label: GradientLabel) -> Option<NodeId> {
        self.children
            .get(&(base, label.sample))
            .copied()
            .filter(|c| self.label(*c) == Some(label))
    }

    /// True when `a` lies on the root path of `b` (a node is its own ancestor).
    pub fn is_ancestor(&self, a: NodeId, b: NodeId) -> bool {
        if !self.contains(a) || !self.contains(b) {
            return false;
        }
        let da = self.nodes[a.0].depth;
        let mut cur = b;
        while self.nodes[cur.0].depth > da {
            cur = self.nodes[cur.0].parent.expect("non-root has parent").0;
        }
        cur == a
    }

    pub fn lca(&self, a: NodeId, b: NodeId) -> Result<NodeId, TreeError> {
        self.node(a)?;
        self.node(b)?;
        let (mut a, mut b) = (a, b);
        while self.nodes[a.0].depth > self.nodes[b.0].depth {
            a = self.nodes[a.0].parent.unwrap().0;
        }
        while self.nodes[b.0].depth > self.nodes[a.0].depth {
            b = self.nodes[b.0].parent.unwrap().0;
        }
        while a != b {
            a = self.nodes[a.0].parent.unwrap().0;
            b = self.nodes[b.0].parent.unwrap().0;
        }
        Ok(a)
    }

    /// Larger of the two edge counts from `a` and `b` to their common ancestor.
    pub fn dist(&self, a: NodeId, b: NodeId) -> Result<usize, TreeError> {
        let p = self.lca(a, b)?;
        let dp = self.nodes[p.0].depth;
        Ok((self.nodes[a.0].depth - dp).max(self.nodes[b.0].depth - dp))
    }

    /// Labels on the path strictly below `ancestor` down to `y`, nearest first.
    pub fn path_labels(&self, ancestor: NodeId, y: NodeId) -> Result<Vec<GradientLabel>, TreeError> {
        if !self.is_ancestor(ancestor, y) {
            return Err(TreeError::UnknownNode(ancestor));
        }
        let mut out = Vec::new();
        let mut cur = y;
        while cur != ancestor {
            let (p, l) = self.nodes[cur.0].parent.unwrap();
            out.push(l);
            cur = p;
        }
        out.reverse();
        Ok(out)
    }

    /// The multiset of gradient labels from the root to `y`, sorted.
    pub fn repr(&self, y: NodeId) -> Result<Vec<GradientLabel>, TreeError> {
        let mut labels = self.path_labels(self.root(), y)?;
        labels.sort();
        Ok(labels)
    }

    /// Multiset containment `repr(z) ⊆ repr(x)`.
    pub fn repr_contained(&self, z: NodeId, x: NodeId) -> Result<bool, TreeError> {
        let rz = self.repr(z)?;
        let rx = self.repr(x)?;
        let mut j = 0;
        for l in &rz {
            while j < rx.len() && rx[j] < *l {
                j += 1;
            }
            if j == rx.len() || rx[j] != *l {
                return Ok(false);
            }
            j += 1;
        }
        Ok(true)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }
}

/// The main branch `x^0, x^1, ...` and, for each step, the label of the
/// gradient that produced the next iterate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MainBranchRecord {
    pub branch: Vec<NodeId>,
    pub aux: Vec<GradientLabel>,
}

impl MainBranchRecord {
    pub fn new(root: NodeId) -> Self {
        MainBranchRecord {
            branch: vec![root],
            aux: Vec::new(),
        }
    }

    pub fn head(&self) -> NodeId {
        *self.branch.last().expect("branch has a root")
    }

    /// Number of steps taken.
    pub fn len(&self) -> usize {
        self.aux.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aux.is_empty()
    }

    pub fn push(&mut self, next: NodeId, label: GradientLabel) {
        self.branch.push(next);
        self.aux.push(label);
    }
}

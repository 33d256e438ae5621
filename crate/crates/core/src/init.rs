//! Confidence-aware initialization: a maximum spanning tree over edge
//! confidences (Prim), then absolute rotations obtained by chaining relative
//! rotations outward from the root.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::error::{invalid, Result};
use crate::graph::{Connectivity, EdgeSource};
use crate::so3::Rotation;

/// Tree edges with confidence below this value trigger a diagnostic.
pub const LOW_CONFIDENCE_WARNING: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeEdge {
    pub child: usize,
    pub parent: usize,
    /// `R_child · R_parentᵀ`.
    pub rotation: Rotation,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanningTree {
    pub n: usize,
    pub root: usize,
    /// In insertion order: every parent appears before its children.
    pub parent_edges: Vec<TreeEdge>,
    pub diagnostics: Vec<String>,
}

impl SpanningTree {
    pub fn total_confidence(&self) -> f64 {
        self.parent_edges.iter().map(|e| e.confidence).sum()
    }

    /// Unordered vertex pairs `(min, max)` of the tree edges, sorted.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut p: Vec<_> = self
            .parent_edges
            .iter()
            .map(|e| (e.child.min(e.parent), e.child.max(e.parent)))
            .collect();
        p.sort_unstable();
        p
    }
}

/// Adjacency lists sorted by neighbour index, built in one pass over the source.
fn adjacency<S: EdgeSource + ?Sized>(src: &S) -> Result<Vec<Vec<(usize, f64)>>> {
    let mut adj = vec![Vec::new(); src.vertex_count()];
    src.visit_edges(&mut |e| {
        adj[e.i].push((e.j, e.confidence));
        adj[e.j].push((e.i, e.confidence));
    })?;
    for list in &mut adj {
        list.sort_unstable_by_key(|&(v, _)| v);
    }
    Ok(adj)
}

/// Vertex with the largest summed incident confidence; ties go to the lowest index.
///
/// Each sum runs over the incident confidences in ascending order, so vertices
/// with the same multiset of confidences tie exactly, before and after any
/// uniform rescaling of the weights.
pub fn select_root<S: EdgeSource + ?Sized>(src: &S) -> Result<usize> {
    Ok(root_from_adjacency(&adjacency(src)?))
}

fn root_from_adjacency(adj: &[Vec<(usize, f64)>]) -> usize {
    let mut best = 0;
    let mut best_sum = f64::NEG_INFINITY;
    for (v, list) in adj.iter().enumerate() {
        let mut incident: Vec<f64> = list.iter().map(|&(_, c)| c).collect();
        incident.sort_by(f64::total_cmp);
        let s: f64 = incident.into_iter().sum();
        if s > best_sum {
            best = v;
            best_sum = s;
        }
    }
    best
}

/// Heap entry ordered by confidence, then by the lexicographically smaller pair.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    confidence: f64,
    pair: (usize, usize),
    child: usize,
    parent: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.confidence
            .total_cmp(&other.confidence)
            .then_with(|| other.pair.cmp(&self.pair))
    }
}

/// Maximum-confidence spanning tree rooted at [`select_root`].
///
/// Every edge is a candidate, including zero-confidence ones, so the tree
/// exists whenever the full graph is connected.
pub fn maximum_spanning_tree<S: EdgeSource + ?Sized>(src: &S) -> Result<SpanningTree> {
    let adj = adjacency(src)?;
    let root = root_from_adjacency(&adj);
    tree_from_adjacency(src, &adj, root)
}

/// As [`maximum_spanning_tree`], grown from an explicit root.
pub fn maximum_spanning_tree_from<S: EdgeSource + ?Sized>(src: &S, root: usize) -> Result<SpanningTree> {
    if root >= src.vertex_count() {
        return Err(invalid(format!("root {root} out of range")));
    }
    let adj = adjacency(src)?;
    tree_from_adjacency(src, &adj, root)
}

fn tree_from_adjacency<S: EdgeSource + ?Sized>(
    src: &S,
    adj: &[Vec<(usize, f64)>],
    root: usize,
) -> Result<SpanningTree> {
    let n = adj.len();
    Connectivity::from_edges(
        n,
        adj.iter()
            .enumerate()
            .flat_map(|(v, list)| list.iter().map(move |&(w, _)| (v, w))),
    )
    .require_connected()?;

    let mut in_tree = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut chosen: Vec<(usize, usize, f64)> = Vec::with_capacity(n.saturating_sub(1));
    let push_from = |v: usize, heap: &mut BinaryHeap<Candidate>, in_tree: &[bool]| {
        for &(w, c) in &adj[v] {
            if !in_tree[w] {
                heap.push(Candidate {
                    confidence: c,
                    pair: (v.min(w), v.max(w)),
                    child: w,
                    parent: v,
                });
            }
        }
    };
    in_tree[root] = true;
    push_from(root, &mut heap, &in_tree);
    while let Some(cand) = heap.pop() {
        if in_tree[cand.child] {
            continue;
        }
        in_tree[cand.child] = true;
        chosen.push((cand.child, cand.parent, cand.confidence));
        push_from(cand.child, &mut heap, &in_tree);
    }

    // Second pass: pick up the relative rotations of the chosen edges.
    let slot: HashMap<(usize, usize), usize> = chosen
        .iter()
        .enumerate()
        .map(|(k, &(c, p, _))| ((c.min(p), c.max(p)), k))
        .collect();
    let mut rotations: Vec<Option<Rotation>> = vec![None; chosen.len()];
    src.visit_edges(&mut |e| {
        if let Some(&k) = slot.get(&(e.i, e.j)) {
            let (child, parent, _) = chosen[k];
            // Stored edges carry R_j R_iᵀ with i < j.
            rotations[k] = Some(if parent == e.i && child == e.j {
                e.rotation
            } else {
                e.rotation.transpose()
            });
        }
    })?;

    let mut diagnostics = Vec::new();
    let mut parent_edges = Vec::with_capacity(chosen.len());
    for (k, (child, parent, confidence)) in chosen.into_iter().enumerate() {
        let rotation = rotations[k].ok_or_else(|| {
            invalid(format!("edge ({parent}, {child}) disappeared between passes over the source"))
        })?;
        if confidence < LOW_CONFIDENCE_WARNING {
            diagnostics.push(format!(
                "spanning tree uses low-confidence edge ({parent}, {child}) with c = {confidence}"
            ));
        }
        parent_edges.push(TreeEdge {
            child,
            parent,
            rotation,
            confidence,
        });
    }
    Ok(SpanningTree {
        n,
        root,
        parent_edges,
        diagnostics,
    })
}

/// Absolute rotations with the root at identity: `R_child = R_parent→child · R_parent`.
pub fn propagate(tree: &SpanningTree) -> Vec<Rotation> {
    let mut out = vec![Rotation::identity(); tree.n];
    for e in &tree.parent_edges {
        out[e.child] = e.rotation * out[e.parent];
    }
    out
}

/// Spanning tree plus the propagated initial rotations.
pub fn confidence_aware_initialization<S: EdgeSource + ?Sized>(src: &S) -> Result<(SpanningTree, Vec<Rotation>)> {
    let tree = maximum_spanning_tree(src)?;
    let rotations = propagate(&tree);
    Ok((tree, rotations))
}

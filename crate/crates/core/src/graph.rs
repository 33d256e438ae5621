//! The epipolar confidence graph: cameras as vertices, confidence-weighted
//! relative rotations as edges.
//!
//! Relative rotations follow one convention throughout the crate:
//! the edge `(i, j)` carries `R_ij ≈ R_j · R_iᵀ`.

use std::collections::HashSet;

use crate::error::{invalid, Error, Result};
use crate::so3::Rotation;

/// One relative-rotation observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    /// Estimate of `R_j · R_iᵀ`.
    pub rotation: Rotation,
    pub confidence: f64,
}

impl Edge {
    pub fn new(i: usize, j: usize, rotation: Rotation, confidence: f64) -> Self {
        Self {
            i,
            j,
            rotation,
            confidence,
        }
    }

    /// Orients the edge so that `i < j`. Reversing an edge transposes its rotation.
    pub fn normalized(self) -> Self {
        if self.i > self.j {
            Self {
                i: self.j,
                j: self.i,
                rotation: self.rotation.transpose(),
                confidence: self.confidence,
            }
        } else {
            self
        }
    }
}

/// Anything that can enumerate the edges of a graph, possibly more than once.
///
/// In-memory graphs and on-disk streaming readers both implement this, so the
/// initializer and solvers never need the full edge list resident.
pub trait EdgeSource {
    fn vertex_count(&self) -> usize;

    /// Calls `f` once per edge, in a fixed order that is identical on every call.
    fn visit_edges(&self, f: &mut dyn FnMut(&Edge)) -> Result<()>;
}

impl<S: EdgeSource + ?Sized> EdgeSource for &S {
    fn vertex_count(&self) -> usize {
        (**self).vertex_count()
    }

    fn visit_edges(&self, f: &mut dyn FnMut(&Edge)) -> Result<()> {
        (**self).visit_edges(f)
    }
}

/// Validated, immutable graph.
#[derive(Debug, Clone, PartialEq)]
pub struct EpipolarConfidenceGraph {
    n: usize,
    edges: Vec<Edge>,
    ground_truth: Option<Vec<Rotation>>,
}

impl EpipolarConfidenceGraph {
    /// Builds a graph, orienting every edge as `i < j` and enforcing simplicity
    /// and the confidence range.
    pub fn build(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut builder = GraphBuilder::new(n)?;
        for e in edges {
            builder.add_edge(e)?;
        }
        builder.finish()
    }

    /// Attaches ground-truth absolute rotations, one per vertex.
    pub fn with_ground_truth(mut self, gt: Vec<Rotation>) -> Result<Self> {
        if gt.len() != self.n {
            return Err(invalid(format!(
                "ground truth has {} rotations for {} vertices",
                gt.len(),
                self.n
            )));
        }
        self.ground_truth = Some(gt);
        Ok(self)
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn ground_truth(&self) -> Option<&[Rotation]> {
        self.ground_truth.as_deref()
    }

    /// Connectivity of the subgraph made of edges with `confidence > min_confidence`.
    pub fn connectivity(&self, min_confidence: f64) -> Connectivity {
        Connectivity::from_edges(
            self.n,
            self.edges
                .iter()
                .filter(|e| e.confidence > min_confidence)
                .map(|e| (e.i, e.j)),
        )
    }

    pub fn is_connected(&self, min_confidence: f64) -> bool {
        self.connectivity(min_confidence).is_connected()
    }
}

impl EdgeSource for EpipolarConfidenceGraph {
    fn vertex_count(&self) -> usize {
        self.n
    }

    fn visit_edges(&self, f: &mut dyn FnMut(&Edge)) -> Result<()> {
        self.edges.iter().for_each(f);
        Ok(())
    }
}

/// Incremental validator shared by [`EpipolarConfidenceGraph::build`] and the
/// text parser.
#[derive(Debug)]
pub(crate) struct GraphBuilder {
    n: usize,
    edges: Vec<Edge>,
    seen: HashSet<(usize, usize)>,
    ground_truth: Vec<Option<Rotation>>,
}

impl GraphBuilder {
    pub(crate) fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("graph needs at least 2 vertices, got {n}")));
        }
        Ok(Self {
            n,
            edges: Vec::new(),
            seen: HashSet::new(),
            ground_truth: Vec::new(),
        })
    }

    pub(crate) fn add_edge(&mut self, edge: Edge) -> Result<()> {
        let e = check_edge(self.n, edge)?;
        if !self.seen.insert((e.i, e.j)) {
            return Err(Error::DuplicateEdge(e.i, e.j));
        }
        self.edges.push(e);
        Ok(())
    }

    pub(crate) fn set_ground_truth(&mut self, id: usize, r: Rotation) -> Result<()> {
        if id >= self.n {
            return Err(invalid(format!("vertex {id} out of range for {} vertices", self.n)));
        }
        if self.ground_truth.is_empty() {
            self.ground_truth = vec![None; self.n];
        }
        if self.ground_truth[id].replace(r).is_some() {
            return Err(invalid(format!("ground truth for vertex {id} given twice")));
        }
        Ok(())
    }

    pub(crate) fn finish(self) -> Result<EpipolarConfidenceGraph> {
        let ground_truth = if self.ground_truth.is_empty() {
            None
        } else {
            let missing: Vec<usize> = (0..self.n).filter(|&v| self.ground_truth[v].is_none()).collect();
            if !missing.is_empty() {
                return Err(invalid(format!("ground truth missing for vertices {missing:?}")));
            }
            Some(self.ground_truth.into_iter().flatten().collect())
        };
        Ok(EpipolarConfidenceGraph {
            n: self.n,
            edges: self.edges,
            ground_truth,
        })
    }
}

/// Range and self-loop checks for a single edge; returns it oriented `i < j`.
pub(crate) fn check_edge(n: usize, edge: Edge) -> Result<Edge> {
    if edge.i >= n || edge.j >= n {
        return Err(invalid(format!(
            "edge ({}, {}) references a vertex outside 0..{n}",
            edge.i, edge.j
        )));
    }
    if edge.i == edge.j {
        return Err(invalid(format!("self-loop on vertex {}", edge.i)));
    }
    if !(0.0..=1.0).contains(&edge.confidence) {
        return Err(invalid(format!(
            "confidence {} of edge ({}, {}) outside [0, 1]",
            edge.confidence, edge.i, edge.j
        )));
    }
    Ok(edge.normalized())
}

/// Connected-component labelling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Connectivity {
    /// Component id per vertex; ids are assigned in order of each component's
    /// lowest vertex.
    pub labels: Vec<usize>,
    pub count: usize,
}

impl Connectivity {
    pub fn from_edges(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut dsu = DisjointSet::new(n);
        for (a, b) in pairs {
            dsu.union(a, b);
        }
        let mut root_label = vec![usize::MAX; n];
        let mut labels = vec![0; n];
        let mut count = 0;
        for v in 0..n {
            let r = dsu.find(v);
            if root_label[r] == usize::MAX {
                root_label[r] = count;
                count += 1;
            }
            labels[v] = root_label[r];
        }
        Self { labels, count }
    }

    pub fn is_connected(&self) -> bool {
        self.count <= 1
    }

    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (v, &l) in self.labels.iter().enumerate() {
            out[l].push(v);
        }
        out
    }

    /// `Ok(())` when connected, otherwise a [`Error::NotConnected`] listing the components.
    pub fn require_connected(&self) -> Result<()> {
        if self.is_connected() {
            Ok(())
        } else {
            Err(Error::NotConnected {
                components: self.components(),
            })
        }
    }
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

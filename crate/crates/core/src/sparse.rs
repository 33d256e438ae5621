//! Sparse Cholesky factorization of anchored weighted graph Laplacians.
//!
//! For rotation averaging the normal matrix `BᵀWB` is `L ⊗ I₃` where `L` is the
//! scalar Laplacian of the edge weights, so one N×N factorization serves all
//! three tangent coordinates. Vertices are reordered with reverse
//! Cuthill–McKee and factored in envelope (skyline) storage, which keeps
//! banded graphs such as sequential capture windows at O(N·w²).

use std::collections::VecDeque;

use nalgebra::Vector3;

use crate::error::{invalid, Error, Result};

/// How the global-rotation null space of the Laplacian is removed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularization {
    /// Delete the row and column of one vertex; its update is zero.
    Fixed(usize),
    /// Add `lambda · I` to the whole system.
    Tikhonov(f64),
}

#[derive(Debug, Clone)]
pub struct LaplacianFactor {
    n: usize,
    /// Permuted position of each vertex, `None` for the fixed vertex.
    position: Vec<Option<usize>>,
    /// Vertex at each permuted position.
    vertex: Vec<usize>,
    /// First stored column of each row of L.
    first: Vec<usize>,
    /// Offset of each row in `values`; row p holds columns first[p]..=p.
    offset: Vec<usize>,
    values: Vec<f64>,
}

impl LaplacianFactor {
    /// Factors the regularized Laplacian of `edges` (`(i, j, weight)`, weight ≥ 0).
    ///
    /// Zero-weight edges are ignored entirely, so they never alter the
    /// ordering or the factor.
    pub fn new(n: usize, edges: &[(usize, usize, f64)], reg: Regularization) -> Result<Self> {
        let fixed = match reg {
            Regularization::Fixed(v) if v >= n => return Err(invalid(format!("anchor {v} out of range"))),
            Regularization::Fixed(v) => Some(v),
            Regularization::Tikhonov(l) if !(l > 0.0 && l.is_finite()) => {
                return Err(invalid(format!("Tikhonov lambda must be > 0, got {l}")))
            }
            Regularization::Tikhonov(_) => None,
        };
        let shift = match reg {
            Regularization::Tikhonov(l) => l,
            Regularization::Fixed(_) => 0.0,
        };

        let mut diag = vec![shift; n];
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, w) in edges {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(invalid(format!("edge ({i}, {j}) has invalid weight {w}")));
            }
            if w == 0.0 {
                continue;
            }
            diag[i] += w;
            diag[j] += w;
            if Some(i) != fixed && Some(j) != fixed {
                adj[i].push((j, -w));
                adj[j].push((i, -w));
            }
        }
        for list in &mut adj {
            list.sort_unstable_by_key(|&(v, _)| v);
        }

        let vertex = reverse_cuthill_mckee(&adj, fixed);
        let mut position = vec![None; n];
        for (p, &v) in vertex.iter().enumerate() {
            position[v] = Some(p);
        }
        let m = vertex.len();
        let mut first = Vec::with_capacity(m);
        let mut offset = Vec::with_capacity(m + 1);
        offset.push(0);
        for (p, &v) in vertex.iter().enumerate() {
            let f = adj[v]
                .iter()
                .filter_map(|&(w, _)| position[w])
                .min()
                .map_or(p, |q| q.min(p));
            first.push(f);
            offset.push(offset[p] + (p - f + 1));
        }
        let mut values = vec![0.0; offset[m]];
        for (p, &v) in vertex.iter().enumerate() {
            values[offset[p] + (p - first[p])] = diag[v];
            for &(w, a) in &adj[v] {
                let q = position[w].expect("neighbour of a free vertex is free");
                if q < p {
                    values[offset[p] + (q - first[p])] += a;
                }
            }
        }

        let mut factor = Self {
            n,
            position,
            vertex,
            first,
            offset,
            values,
        };
        factor.factorize()?;
        Ok(factor)
    }

    fn row(&self, p: usize) -> &[f64] {
        &self.values[self.offset[p]..self.offset[p + 1]]
    }

    fn factorize(&mut self) -> Result<()> {
        let m = self.vertex.len();
        for i in 0..m {
            let fi = self.first[i];
            let oi = self.offset[i];
            for j in fi..i {
                let fj = self.first[j];
                let oj = self.offset[j];
                let k0 = fi.max(fj);
                let mut s = self.values[oi + (j - fi)];
                for k in k0..j {
                    s -= self.values[oi + (k - fi)] * self.values[oj + (k - fj)];
                }
                self.values[oi + (j - fi)] = s / self.values[oj + (j - fj)];
            }
            let diag_index = oi + (i - fi);
            let original = self.values[diag_index];
            let mut d = original;
            for k in fi..i {
                let l = self.values[oi + (k - fi)];
                d -= l * l;
            }
            if !(original > 0.0) || !(d > 1e-10 * original) {
                return Err(Error::DegenerateWeights(format!(
                    "normal equations are singular at vertex {} (pivot {d:.3e})",
                    self.vertex[i]
                )));
            }
            self.values[diag_index] = d.sqrt();
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.vertex.len()
    }

    /// Number of stored entries of the factor.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    /// Solves the system for three right-hand sides at once, one per tangent
    /// coordinate. The fixed vertex, if any, receives a zero update.
    pub fn solve(&self, rhs: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        assert_eq!(rhs.len(), self.n, "right-hand side length");
        let m = self.vertex.len();
        let mut x: Vec<Vector3<f64>> = self.vertex.iter().map(|&v| rhs[v]).collect();
        for p in 0..m {
            let row = self.row(p);
            let f = self.first[p];
            let mut s = x[p];
            for (k, l) in row[..row.len() - 1].iter().enumerate() {
                s -= x[f + k] * *l;
            }
            x[p] = s / row[row.len() - 1];
        }
        for p in (0..m).rev() {
            let row = self.row(p);
            let f = self.first[p];
            x[p] /= row[row.len() - 1];
            let xp = x[p];
            for (k, l) in row[..row.len() - 1].iter().enumerate() {
                x[f + k] -= xp * *l;
            }
        }
        let mut out = vec![Vector3::zeros(); self.n];
        for (v, slot) in out.iter_mut().enumerate() {
            if let Some(p) = self.position[v] {
                *slot = x[p];
            }
        }
        out
    }
}

/// Reverse Cuthill–McKee order of every vertex except `skip`. Each component
/// starts from its minimum-degree vertex and neighbours are visited by
/// ascending (degree, index), so the order is fully deterministic.
fn reverse_cuthill_mckee(adj: &[Vec<(usize, f64)>], skip: Option<usize>) -> Vec<usize> {
    let n = adj.len();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    if let Some(s) = skip {
        visited[s] = true;
    }
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (degree[v], v));
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    let mut scratch = Vec::new();
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            scratch.clear();
            scratch.extend(adj[v].iter().map(|&(w, _)| w).filter(|&w| !visited[w]));
            scratch.sort_by_key(|&w| (degree[w], w));
            for &w in &scratch {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

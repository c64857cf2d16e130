//! Weighted undirected graphs, their Laplacians, and the dense inverse
//! primitives used to keep `(L_uu)^-1` current.

use std::collections::HashSet;
use std::fmt::Write as _;

use nalgebra::{Cholesky, DMatrix};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Weighted undirected graph on nodes `0..n`.
///
/// Edges are stored with `i < j`; at most one edge per unordered pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
}

impl Graph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (a, b, w) in edges {
            let (i, j) = (a.min(b), a.max(b));
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop on node {i}")));
            }
            if j >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) references a node outside 0..{n}"
                )));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) has invalid weight {w}"
                )));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({a}, {b})")));
            }
            out.push(Edge { i, j, weight: w });
        }
        Ok(Self { n, edges: out })
    }

    /// Unit-weight path `0 - 1 - ... - (n-1)`.
    pub fn chain(n: usize) -> Self {
        let edges = (1..n).map(|j| Edge {
            i: j - 1,
            j,
            weight: 1.0,
        });
        Self {
            n,
            edges: edges.collect(),
        }
    }

    /// Unit-weight 4-neighbour grid with `rows * cols` nodes, node `r * cols + c`.
    pub fn grid(rows: usize, cols: usize) -> Self {
        let mut edges = Vec::with_capacity(2 * rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let v = r * cols + c;
                if c + 1 < cols {
                    edges.push(Edge { i: v, j: v + 1, weight: 1.0 });
                }
                if r + 1 < rows {
                    edges.push(Edge { i: v, j: v + cols, weight: 1.0 });
                }
            }
        }
        Self { n: rows * cols, edges }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            if e.weight > 0.0 {
                adj[e.i].push(e.j);
                adj[e.j].push(e.i);
            }
        }
        adj
    }

    /// Connected components over positive-weight edges, each sorted ascending,
    /// ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        components_of(&self.neighbors())
    }

    /// Parses the whitespace-separated edge-list format: `i j [w]` per line,
    /// 1-based ids, `#` comments. The node count is the largest id seen.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut raw = Vec::new();
        let mut seen = HashSet::new();
        let mut n = 0usize;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() < 2 || fields.len() > 3 {
                return Err(perr(format!("expected `i j [w]`, got `{line}`")));
            }
            let id = |s: &str| -> Result<usize> {
                match s.parse::<usize>() {
                    Ok(v) if v >= 1 => Ok(v - 1),
                    _ => Err(perr(format!("invalid node id `{s}` (ids are 1-based)"))),
                }
            };
            let (a, b) = (id(fields[0])?, id(fields[1])?);
            let w = match fields.get(2) {
                Some(s) => s
                    .parse::<f64>()
                    .map_err(|_| perr(format!("invalid weight `{s}`")))?,
                None => 1.0,
            };
            if a == b {
                return Err(perr(format!("self-loop on node {}", a + 1)));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(perr(format!("invalid weight {w}")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(perr(format!("duplicate edge {} {}", a + 1, b + 1)));
            }
            n = n.max(a + 1).max(b + 1);
            raw.push((a, b, w));
        }
        Self::new(n, raw)
    }

    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for e in &self.edges {
            let _ = writeln!(s, "{} {} {}", e.i + 1, e.j + 1, e.weight);
        }
        s
    }
}

pub(crate) fn components_of(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut comp = vec![usize::MAX; n];
    let mut out = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![start];
        comp[start] = id;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if comp[w] == usize::MAX {
                    comp[w] = id;
                    members.push(w);
                    stack.push(w);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// Dense `beta * L` (plus an optional ridge `delta * I`) for a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    matrix: DMatrix<f64>,
    beta: f64,
    ridge: f64,
}

impl Laplacian {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn node_count(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    /// Adds `delta * I`. Makes every principal block positive definite so
    /// unanchored components no longer fail.
    pub fn with_ridge(mut self, delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::InvalidParameter(format!("ridge must be >= 0, got {delta}")));
        }
        for i in 0..self.matrix.nrows() {
            self.matrix[(i, i)] += delta;
        }
        self.ridge += delta;
        Ok(self)
    }

    /// Components of the coupling structure (nonzero off-diagonals).
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.node_count();
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                if i != j && self.matrix[(i, j)] != 0.0 {
                    adj[i].push(j);
                }
            }
        }
        components_of(&adj)
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |a, b| self.matrix[(rows[a], cols[b])])
    }
}

/// Builds `beta * L` with `L_ij = 1{i=j} sum_k w_ik - w_ij`.
pub fn build_laplacian(graph: &Graph, beta: f64) -> Result<Laplacian> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    let n = graph.node_count();
    let mut m = DMatrix::zeros(n, n);
    for e in graph.edges() {
        if e.i == e.j {
            return Err(Error::InvalidGraph(format!("self-loop on node {}", e.i)));
        }
        if !(e.weight >= 0.0) {
            return Err(Error::InvalidGraph(format!(
                "negative weight {} on edge ({}, {})",
                e.weight, e.i, e.j
            )));
        }
        let w = beta * e.weight;
        m[(e.i, e.j)] -= w;
        m[(e.j, e.i)] -= w;
        m[(e.i, e.i)] += w;
        m[(e.j, e.j)] += w;
    }
    Ok(Laplacian {
        matrix: m,
        beta,
        ridge: 0.0,
    })
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
///
/// Returns `None` when the factorization fails (not positive definite).
pub fn invert_spd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    let inv = Cholesky::new(m.clone())?.inverse();
    Some(symmetrize(inv))
}

fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Removes row/column `pos` from `inverse = A^-1`, returning the inverse of
/// `A` with that row and column deleted:
/// `G - G[:,k] G[k,:] / G_kk`, then drop `k`. Costs `O(m^2)`.
pub fn downdate_inverse(inverse: &DMatrix<f64>, pos: usize, singularity: f64) -> Result<DMatrix<f64>> {
    let m = inverse.nrows();
    assert!(pos < m, "downdate position {pos} out of range for {m}x{m} inverse");
    let pivot = inverse[(pos, pos)];
    if !(pivot > singularity) {
        return Err(Error::Degenerate {
            node: pos,
            pivot,
            tolerance: singularity,
        });
    }
    let keep = |a: usize| if a < pos { a } else { a + 1 };
    let col = inverse.column(pos);
    let out = DMatrix::from_fn(m - 1, m - 1, |a, b| {
        let (ra, rb) = (keep(a), keep(b));
        inverse[(ra, rb)] - col[ra] * col[rb] / pivot
    });
    Ok(out)
}

/// Max-abs entry of `a * b - I`.
pub fn identity_residual(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let p = a * b;
    let mut worst = 0.0f64;
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((p[(i, j)] - target).abs());
        }
    }
    worst
}

#[cfg(test)]
pub(crate) fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

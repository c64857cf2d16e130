//! Reference computations shared by the integration tests.
//!
//! Everything here is deliberately naive and independent of the library's
//! fast paths: Laplacians are assembled by hand, inverses come from LU
//! rather than Cholesky, and posteriors are enumerated over full label
//! vectors with the quadratic energy evaluated term by term.

#![allow(dead_code)]

use graph_eem::Graph;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Random connected graph: a random spanning tree plus extra edges with
/// probability `density`; weights uniform in `(0, 2]`.
pub fn random_graph<R: Rng + ?Sized>(n: usize, density: f64, rng: &mut R) -> Graph {
    let mut edges = Vec::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        edges.push((j, i, weight(rng)));
    }
    for i in 0..n {
        for j in (i + 2)..n {
            if rng.random_bool(density) && !edges.iter().any(|&(a, b, _)| (a, b) == (i, j)) {
                edges.push((i, j, weight(rng)));
            }
        }
    }
    Graph::new(n, edges).expect("generated graph is valid")
}

fn weight<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    2.0 * (1.0 - rng.random::<f64>())
}

/// `k` distinct random nodes with random ±1 labels.
pub fn random_labels<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<(usize, f64)> {
    let nodes = rand::seq::index::sample(rng, n, k);
    nodes
        .iter()
        .map(|v| (v, if rng.random_bool(0.5) { 1.0 } else { -1.0 }))
        .collect()
}

/// `β (D - W)` assembled edge by edge.
pub fn dense_laplacian(graph: &Graph, beta: f64) -> DMatrix<f64> {
    let n = graph.node_count();
    let mut l = DMatrix::zeros(n, n);
    for e in graph.edges() {
        l[(e.i, e.j)] -= beta * e.weight;
        l[(e.j, e.i)] -= beta * e.weight;
        l[(e.i, e.i)] += beta * e.weight;
        l[(e.j, e.j)] += beta * e.weight;
    }
    l
}

pub fn unlabeled_of(n: usize, obs: &[(usize, f64)]) -> Vec<usize> {
    (0..n).filter(|v| obs.iter().all(|&(o, _)| o != *v)).collect()
}

pub fn block(l: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| l[(rows[a], cols[b])])
}

/// `(L_uu)^-1` via LU, with `u` in the given order.
pub fn lu_inverse(l: &DMatrix<f64>, u: &[usize]) -> DMatrix<f64> {
    block(l, u, u).lu().try_inverse().expect("anchored block is invertible")
}

/// Decision values `2 h_k / G_kk` recomputed from scratch for every node
/// of `unlabeled_of(n, obs)`, returned as `(node, f)`.
pub fn reference_decisions(l: &DMatrix<f64>, obs: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let u = unlabeled_of(l.nrows(), obs);
    let labeled: Vec<usize> = obs.iter().map(|&(v, _)| v).collect();
    let y = DVector::from_iterator(obs.len(), obs.iter().map(|&(_, s)| s));
    let g = lu_inverse(l, &u);
    let h = -(&g * (block(l, &u, &labeled) * y));
    u.iter()
        .enumerate()
        .map(|(a, &v)| (v, 2.0 * h[a] / g[(a, a)]))
        .collect()
}

pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `½ yᵀ L y`, summed over every entry.
pub fn energy(l: &DMatrix<f64>, y: &[f64]) -> f64 {
    let n = y.len();
    let mut e = 0.0;
    for i in 0..n {
        for j in 0..n {
            e += y[i] * l[(i, j)] * y[j];
        }
    }
    0.5 * e
}

/// Every completion of the unobserved nodes with its unnormalized weight,
/// scaled so the heaviest completion has weight 1.
pub fn completions(l: &DMatrix<f64>, obs: &[(usize, f64)]) -> (Vec<usize>, Vec<(Vec<f64>, f64)>) {
    let n = l.nrows();
    let u = unlabeled_of(n, obs);
    let mut base = vec![0.0; n];
    for &(v, s) in obs {
        base[v] = s;
    }
    let mut configs = Vec::with_capacity(1 << u.len());
    for mask in 0u64..(1u64 << u.len()) {
        let mut y = base.clone();
        for (bit, &v) in u.iter().enumerate() {
            y[v] = if mask >> bit & 1 == 1 { 1.0 } else { -1.0 };
        }
        let e = energy(l, &y);
        configs.push((y, e));
    }
    let e_min = configs.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    for c in configs.iter_mut() {
        c.1 = (-(c.1 - e_min)).exp();
    }
    (u, configs)
}

/// `P(Y_v = +1 | observations)` for every unobserved node, by enumeration.
pub fn enumerated_marginals(l: &DMatrix<f64>, obs: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let (u, configs) = completions(l, obs);
    let z: f64 = configs.iter().map(|c| c.1).sum();
    u.iter()
        .map(|&v| {
            let pos: f64 = configs.iter().filter(|c| c.0[v] > 0.0).map(|c| c.1).sum();
            (v, pos / z)
        })
        .collect()
}

/// Expected zero-one risk after querying `q`: the outcome of `Y_q` and all
/// other completions are enumerated jointly. Risk is normalized by `n`.
pub fn enumerated_lookahead_risk(l: &DMatrix<f64>, obs: &[(usize, f64)], q: usize) -> f64 {
    let n = l.nrows();
    let (u, configs) = completions(l, obs);
    let z: f64 = configs.iter().map(|c| c.1).sum();
    let mut risk = 0.0;
    for y in [1.0, -1.0] {
        let branch: Vec<&(Vec<f64>, f64)> = configs.iter().filter(|c| c.0[q] == y).collect();
        let z_y: f64 = branch.iter().map(|c| c.1).sum();
        let mut r = 0.0;
        for &v in u.iter().filter(|&&v| v != q) {
            let pos: f64 = branch.iter().filter(|c| c.0[v] > 0.0).map(|c| c.1).sum();
            let p = pos / z_y;
            r += p.min(1.0 - p);
        }
        risk += z_y / z * r / n as f64;
    }
    risk
}

pub fn max_abs(a: impl IntoIterator<Item = f64>, b: impl IntoIterator<Item = f64>) -> f64 {
    a.into_iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

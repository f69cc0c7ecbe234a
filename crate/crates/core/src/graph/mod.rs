//! Spatial graphs and the edge-difference (graphTV) operator.
//!
//! Edges are stored as flat `u`/`v`/`w` arrays with `u < v`. Row `k` of
//! `D2 X` is `w_k (X[u_k, :] - X[v_k, :])`.

pub mod io;

use std::collections::VecDeque;

use thiserror::Error;

use crate::linalg::{
    kron_right_apply, DenseMatrix, LinalgError, LinearOperator, SparseMatrix, TemporalField,
};

pub use io::{parse_mesh, read_mesh, render_mesh, write_mesh};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge {index} = ({u}, {v}) must satisfy u < v < {n}")]
    InvalidEdge {
        index: usize,
        u: usize,
        v: usize,
        n: usize,
    },
    #[error("duplicate edge ({u}, {v})")]
    DuplicateEdge { u: usize, v: usize },
    #[error("edge {index} has invalid weight {weight}")]
    BadWeight { index: usize, weight: f64 },
    #[error("non-finite coordinate at node {0}")]
    BadCoordinate(usize),
    #[error("{op}: field has {got} rows, graph needs {expected}")]
    RowMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{expected} weights given for {got} edges")]
    WeightCount { expected: usize, got: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Format(#[from] crate::linalg::io::FormatError),
}

/// Undirected weighted graph over nodes with 3D coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshGraph {
    coords: Vec<[f64; 3]>,
    u: Vec<usize>,
    v: Vec<usize>,
    w: Vec<f64>,
}

impl MeshGraph {
    /// Validating constructor. `weights = None` means unit weights.
    pub fn new(
        coords: Vec<[f64; 3]>,
        edges: &[(usize, usize)],
        weights: Option<Vec<f64>>,
    ) -> Result<Self, GraphError> {
        let n = coords.len();
        if let Some(i) = coords.iter().position(|c| c.iter().any(|x| !x.is_finite())) {
            return Err(GraphError::BadCoordinate(i));
        }
        let w = match weights {
            Some(w) if w.len() != edges.len() => {
                return Err(GraphError::WeightCount {
                    expected: w.len(),
                    got: edges.len(),
                })
            }
            Some(w) => w,
            None => vec![1.0; edges.len()],
        };
        for (index, (&(u, v), &weight)) in edges.iter().zip(&w).enumerate() {
            if u >= v || v >= n {
                return Err(GraphError::InvalidEdge { index, u, v, n });
            }
            if !(weight.is_finite() && weight > 0.0) {
                return Err(GraphError::BadWeight { index, weight });
            }
        }
        let mut sorted: Vec<(usize, usize)> = edges.to_vec();
        sorted.sort_unstable();
        if let Some(d) = sorted.windows(2).find(|p| p[0] == p[1]) {
            return Err(GraphError::DuplicateEdge { u: d[0].0, v: d[0].1 });
        }
        Ok(Self {
            coords,
            u: edges.iter().map(|e| e.0).collect(),
            v: edges.iter().map(|e| e.1).collect(),
            w,
        })
    }

    /// Path `0 - 1 - ... - (n-1)` along the x axis.
    pub fn path(n: usize) -> Self {
        let coords = (0..n).map(|i| [i as f64, 0.0, 0.0]).collect();
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::new(coords, &edges, None).expect("path graph is valid")
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn num_edges(&self) -> usize {
        self.u.len()
    }

    pub fn coords(&self) -> &[[f64; 3]] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// `(u, v, w)` of edge `k`.
    pub fn edge(&self, k: usize) -> (usize, usize, f64) {
        (self.u[k], self.v[k], self.w[k])
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.num_edges()).map(|k| self.edge(k))
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes()];
        for (&a, &b) in self.u.iter().zip(&self.v) {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Component label of every node, labels numbered from 0 in node order.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let adj = self.adjacency();
        let mut label = vec![usize::MAX; self.num_nodes()];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for s in 0..self.num_nodes() {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = count;
            queue.push_back(s);
            while let Some(a) = queue.pop_front() {
                for &b in &adj[a] {
                    if label[b] == usize::MAX {
                        label[b] = count;
                        queue.push_back(b);
                    }
                }
            }
            count += 1;
        }
        (count, label)
    }

    pub fn is_connected(&self) -> bool {
        self.components().0 <= 1
    }

    /// Hop distances from `seed` (BFS); unreachable nodes get `usize::MAX`.
    pub fn hop_distances(&self, seed: usize) -> Vec<usize> {
        let adj = self.adjacency();
        let mut dist = vec![usize::MAX; self.num_nodes()];
        dist[seed] = 0;
        let mut queue = VecDeque::from([seed]);
        while let Some(a) = queue.pop_front() {
            for &b in &adj[a] {
                if dist[b] == usize::MAX {
                    dist[b] = dist[a] + 1;
                    queue.push_back(b);
                }
            }
        }
        dist
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (self.coords[a], self.coords[b]);
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
    }
}

fn check_rows(op: &'static str, expected: usize, got: usize) -> Result<(), GraphError> {
    if expected != got {
        return Err(GraphError::RowMismatch { op, expected, got });
    }
    Ok(())
}

/// `D2 X`, an `m x T` field.
pub fn graphtv_apply(g: &MeshGraph, x: &TemporalField) -> Result<TemporalField, GraphError> {
    check_rows("graphtv_apply", g.num_nodes(), x.rows())?;
    let mut out = DenseMatrix::zeros(g.num_edges(), x.cols());
    graphtv_apply_into(g, x, &mut out);
    Ok(out)
}

/// `out = D2 X` with shapes already checked.
pub fn graphtv_apply_into(g: &MeshGraph, x: &TemporalField, out: &mut TemporalField) {
    for k in 0..g.num_edges() {
        let (a, b, w) = g.edge(k);
        let (xa, xb) = (x.row(a), x.row(b));
        for ((o, &p), &q) in out.row_mut(k).iter_mut().zip(xa).zip(xb) {
            *o = w * (p - q);
        }
    }
}

/// `D2^T Y`, an `n x T` field.
pub fn graphtv_adjoint(g: &MeshGraph, y: &TemporalField) -> Result<TemporalField, GraphError> {
    check_rows("graphtv_adjoint", g.num_edges(), y.rows())?;
    let mut out = DenseMatrix::zeros(g.num_nodes(), y.cols());
    graphtv_adjoint_acc(g, 1.0, y, &mut out);
    Ok(out)
}

/// `out += alpha * D2^T Y` by scatter-add.
pub fn graphtv_adjoint_acc(g: &MeshGraph, alpha: f64, y: &TemporalField, out: &mut TemporalField) {
    for k in 0..g.num_edges() {
        let (a, b, w) = g.edge(k);
        let s = alpha * w;
        let yk = y.row(k);
        for (o, &v) in out.row_mut(a).iter_mut().zip(yk) {
            *o += s * v;
        }
        for (o, &v) in out.row_mut(b).iter_mut().zip(yk) {
            *o -= s * v;
        }
    }
}

/// Materialized `D2 = W (P1 - P2)` for oracles and small problems.
pub fn build_dense_d2(g: &MeshGraph) -> SparseMatrix {
    let mut triplets = Vec::with_capacity(2 * g.num_edges());
    for (k, (a, b, w)) in g.edges().enumerate() {
        triplets.push((k, a, w));
        triplets.push((k, b, -w));
    }
    SparseMatrix::from_triplets(g.num_edges(), g.num_nodes(), &triplets)
        .expect("validated graph gives valid triplets")
}

/// `X D1 D1^T`.
pub fn timediff_gram_apply(x: &TemporalField) -> Result<TemporalField, LinalgError> {
    if x.cols() < 2 {
        return Err(LinalgError::TooFewTimePoints {
            needed: 2,
            got: x.cols(),
        });
    }
    let mut out = DenseMatrix::zeros(x.rows(), x.cols());
    timediff_gram_acc(1.0, x, &mut out);
    Ok(out)
}

/// `out += alpha * X D1 D1^T`. A no-op for `T < 2`.
pub fn timediff_gram_acc(alpha: f64, x: &TemporalField, out: &mut TemporalField) {
    let t = x.cols();
    if t < 2 {
        return;
    }
    for i in 0..x.rows() {
        let r = x.row(i);
        let o = out.row_mut(i);
        o[0] += alpha * (r[0] - r[1]);
        for j in 1..t - 1 {
            o[j] += alpha * (2.0 * r[j] - r[j - 1] - r[j + 1]);
        }
        o[t - 1] += alpha * (r[t - 1] - r[t - 2]);
    }
}

/// `||X D1||_F^2`, zero when `T < 2`.
pub fn timediff_norm_sq(x: &TemporalField) -> f64 {
    if x.cols() < 2 {
        return 0.0;
    }
    kron_right_apply(x).expect("T >= 2").norm_sq()
}

/// `I_T (x) D2` acting on `vec(X)`.
#[derive(Debug, Clone, Copy)]
pub struct GraphTvOperator<'a> {
    pub graph: &'a MeshGraph,
    pub t: usize,
}

impl LinearOperator for GraphTvOperator<'_> {
    fn domain_dim(&self) -> usize {
        self.graph.num_nodes() * self.t
    }

    fn range_dim(&self) -> usize {
        self.graph.num_edges() * self.t
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let xm = DenseMatrix::unvec(self.graph.num_nodes(), self.t, x).expect("domain size");
        let y = graphtv_apply(self.graph, &xm).expect("rows match");
        out.copy_from_slice(&y.vec());
    }

    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        let ym = DenseMatrix::unvec(self.graph.num_edges(), self.t, y).expect("range size");
        let x = graphtv_adjoint(self.graph, &ym).expect("rows match");
        out.copy_from_slice(&x.vec());
    }
}

//! Test oracles: random instances, dense reference operators, scalar
//! minimizers, finite differences and an independent convex reference solver.
//!
//! Nothing here calls into the matrix-free code paths of `vpal` except the
//! plain container types, so results can serve as ground truth.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use vpal::graph::MeshGraph;
use vpal::linalg::DenseMatrix;
use vpal::model::Problem;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut TestRng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

pub fn from_na(m: &DMatrix<f64>) -> DenseMatrix {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Column-stacking `vec(X)`.
pub fn vec_of(m: &DenseMatrix) -> DVector<f64> {
    DVector::from_fn(m.rows() * m.cols(), |k, _| m[(k % m.rows(), k / m.rows())])
}

pub fn unvec(v: &DVector<f64>, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |i, j| v[j * rows + i])
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Random connected graph: a random spanning tree plus `extra` chords,
/// weights uniform in `[0.5, 1.5]` (or unit weights).
pub fn random_graph(rng: &mut TestRng, n: usize, extra: usize, weighted: bool) -> MeshGraph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for k in 1..n {
        let parent = order[rng.random_range(0..k)];
        let (a, b) = (order[k], parent);
        edges.push((a.min(b), a.max(b)));
    }
    let max_edges = n * (n - 1) / 2;
    let mut tries = 0;
    while edges.len() < (n - 1 + extra).min(max_edges) && tries < 100 * (extra + 1) {
        tries += 1;
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b {
            continue;
        }
        let e = (a.min(b), a.max(b));
        if !edges.contains(&e) {
            edges.push(e);
        }
    }
    let weights = weighted.then(|| edges.iter().map(|_| rng.random_range(0.5..1.5)).collect());
    let coords = (0..n)
        .map(|_| [rng.random(), rng.random(), rng.random()])
        .collect();
    MeshGraph::new(coords, &edges, weights).expect("generated graph is valid")
}

/// Dense `D2 = W (P1 - P2)`, built from the edge list.
pub fn dense_d2(g: &MeshGraph) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(g.num_edges(), g.num_nodes());
    for k in 0..g.num_edges() {
        let (u, v, w) = g.edge(k);
        d[(k, u)] = w;
        d[(k, v)] = -w;
    }
    d
}

/// Dense `D1` of size `T x (T-1)`: column `j` is `e_j - e_{j+1}`.
pub fn dense_d1(t: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(t, t.saturating_sub(1));
    for j in 0..t.saturating_sub(1) {
        d[(j, j)] = 1.0;
        d[(j + 1, j)] = -1.0;
    }
    d
}

/// Golden-section minimization of a unimodal `f` on `[a, b]`.
pub fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Minimizer of `f` over a uniform grid of `points` samples on `[a, b]`.
pub fn grid_min(f: impl Fn(f64) -> f64, a: f64, b: f64, points: usize) -> f64 {
    let h = (b - a) / (points - 1) as f64;
    (0..points)
        .map(|i| a + h * i as f64)
        .map(|x| (x, f(x)))
        .fold((a, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
        .0
}

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn central_diff(f: impl Fn(&DenseMatrix) -> f64, x: &DenseMatrix, h: f64) -> DenseMatrix {
    let mut g = DenseMatrix::zeros(x.rows(), x.cols());
    let mut xp = x.clone();
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            let orig = xp[(i, j)];
            xp[(i, j)] = orig + h;
            let fp = f(&xp);
            xp[(i, j)] = orig - h;
            let fm = f(&xp);
            xp[(i, j)] = orig;
            g[(i, j)] = (fp - fm) / (2.0 * h);
        }
    }
    g
}

/// Random instance: Gaussian `p x n` lead field, random connected weighted
/// graph, Gaussian data.
pub fn random_instance(
    rng: &mut TestRng,
    n: usize,
    t: usize,
    p: usize,
    lambda: f64,
    mu: f64,
    eta: f64,
) -> Problem {
    let extra = rng.random_range(0..=n);
    let mesh = Arc::new(random_graph(rng, n, extra, true));
    let l = Arc::new(gaussian(rng, p, n));
    let b = gaussian(rng, p, t);
    Problem::new(l, b, mesh, lambda, mu, eta).expect("consistent instance")
}

/// `random_instance` with `p >= n`, so the lead field has full column rank
/// almost surely and the problem is strictly convex.
pub fn convex_instance(
    rng: &mut TestRng,
    n: usize,
    t: usize,
    p: usize,
    lambda: f64,
    mu: f64,
    eta: f64,
) -> Problem {
    assert!(p >= n, "convex instances need p >= n");
    random_instance(rng, n, t, p, lambda, mu, eta)
}

#[derive(Debug, Clone)]
pub struct Reference {
    pub x: DenseMatrix,
    pub objective: f64,
    /// Primal minus dual objective at termination; bounds the suboptimality.
    pub gap: f64,
    pub sweeps: usize,
}

/// Independent solve of the vectorized problem
/// `min 1/2 ||A x - b||^2 + mu ||D x||_1` with `A = [I (x) L; lambda (D1^T (x) I)]`
/// and `D = I (x) D2`, through its box-constrained dual
/// `min_{|z| <= mu} 1/2 (c - D^T z)^T Q^{-1} (c - D^T z)`, `Q = A^T A`, `c = A^T b`,
/// by cyclic coordinate descent. Stops when the duality gap drops below
/// `gap_tol * max(1, |primal|)`.
pub fn reference_solve(
    l: &DenseMatrix,
    b: &DenseMatrix,
    mesh: &MeshGraph,
    lambda: f64,
    mu: f64,
    gap_tol: f64,
    max_sweeps: usize,
) -> Reference {
    let (p, n) = (l.rows(), l.cols());
    let t = b.cols();
    let ln = to_na(l);
    let it = DMatrix::<f64>::identity(t, t);
    let d1 = dense_d1(t);
    let top = kron(&it, &ln);
    let bottom = kron(&d1.transpose(), &DMatrix::identity(n, n)) * lambda;
    let mut a = DMatrix::zeros(top.nrows() + bottom.nrows(), n * t);
    a.rows_mut(0, top.nrows()).copy_from(&top);
    a.rows_mut(top.nrows(), bottom.nrows()).copy_from(&bottom);
    let mut rhs = DVector::zeros(a.nrows());
    rhs.rows_mut(0, p * t).copy_from(&vec_of(b));
    let d = kron(&it, &dense_d2(mesh));

    let q = a.transpose() * &a;
    let c = a.transpose() * &rhs;
    let qinv = q
        .clone()
        .cholesky()
        .expect("stacked operator has full column rank")
        .inverse();
    let primal = |x: &DVector<f64>| {
        0.5 * (&a * x - &rhs).norm_squared() + mu * (&d * x).iter().map(|v| v.abs()).sum::<f64>()
    };
    let const_term = 0.5 * rhs.norm_squared();

    let k = d.nrows();
    let mut z: DVector<f64> = DVector::zeros(k);
    if mu == 0.0 || k == 0 {
        let x = &qinv * &c;
        let f = primal(&x);
        return Reference {
            x: unvec(&x, n, t),
            objective: f,
            gap: 0.0,
            sweeps: 0,
        };
    }
    // Dual Hessian H = D Q^{-1} D^T and linear term D Q^{-1} c.
    let dq = &d * &qinv;
    let h = &dq * d.transpose();
    let g0 = &dq * &c;
    // grad(z) = H z - g0, maintained incrementally.
    let mut grad: DVector<f64> = -g0.clone();
    let mut sweeps = 0;
    let mut best = (DVector::zeros(n * t), f64::INFINITY, f64::INFINITY);
    loop {
        for i in 0..k {
            let hii = h[(i, i)];
            if hii <= 0.0 {
                continue;
            }
            let zi = (z[i] - grad[i] / hii).clamp(-mu, mu);
            let delta = zi - z[i];
            if delta != 0.0 {
                z[i] = zi;
                grad.axpy(delta, &h.column(i), 1.0);
            }
        }
        sweeps += 1;
        if sweeps % 10 == 0 || sweeps >= max_sweeps {
            let w = &c - d.transpose() * &z;
            let x = &qinv * &w;
            let dual = -0.5 * w.dot(&x) + const_term;
            let f = primal(&x);
            let gap = f - dual;
            if f < best.1 {
                best = (x, f, gap);
            }
            if gap <= gap_tol * f.abs().max(1.0) || sweeps >= max_sweeps {
                return Reference {
                    x: unvec(&best.0, n, t),
                    objective: best.1,
                    gap: best.2,
                    sweeps,
                };
            }
        }
    }
}

/// `reference_solve` on a `Problem` with a dense lead field.
pub fn reference_for(prob: &Problem, gap_tol: f64, max_sweeps: usize) -> Reference {
    let l = match prob.forward() {
        vpal::model::Forward::Dense(l) => (**l).clone(),
        vpal::model::Forward::Identity(n) => DenseMatrix::identity(*n),
    };
    reference_solve(&l, prob.data(), prob.mesh(), prob.lambda, prob.mu, gap_tol, max_sweeps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_vertex() {
        let x = golden_min(|x| (x - 0.3) * (x - 0.3), -1.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
        assert!((grid_min(|x| (x - 0.3).abs(), 0.0, 1.0, 11) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn random_graph_is_connected() {
        let mut r = rng(3);
        for n in 2..12 {
            let g = random_graph(&mut r, n, 4, true);
            assert!(g.is_connected());
            assert!(g.num_edges() >= n - 1);
        }
    }

    #[test]
    fn kron_vec_identity() {
        // vec(A X B) = (B^T (x) A) vec(X)
        let mut r = rng(5);
        let a = gaussian(&mut r, 3, 2);
        let x = gaussian(&mut r, 2, 4);
        let b = gaussian(&mut r, 4, 3);
        let lhs = vec_of(&from_na(&(to_na(&a) * to_na(&x) * to_na(&b))));
        let rhs = kron(&to_na(&b).transpose(), &to_na(&a)) * vec_of(&x);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn reference_matches_denoising_closed_form() {
        // n = 2, one edge, L = I, T = 1: soft threshold of the difference.
        let mesh = MeshGraph::new(vec![[0.0; 3]; 2], &[(0, 1)], None).unwrap();
        let b = DenseMatrix::from_rows(&[[1.0], [-1.0]]);
        let mu = 0.25;
        let r = reference_solve(&DenseMatrix::identity(2), &b, &mesh, 0.0, mu, 1e-14, 10_000);
        // x0 - x1 shrinks from 2 by 2 mu; the mean stays at 0.
        assert!((r.x[(0, 0)] - 0.75).abs() < 1e-7, "{:?}", r.x);
        assert!((r.x[(1, 0)] + 0.75).abs() < 1e-7);
        assert!(r.gap < 1e-12);
    }
}

//! Fiedler vectors of the normalized graph Laplacian.
//!
//! For a subgraph with weight matrix `W` and degree matrix `D` the relaxed
//! normalized-cut indicator is the second generalized eigenvector of
//! `(D - W) y = lambda D y`. Writing `y = D^{-1/2} z`, `z` is the eigenvector
//! of `M = D^{-1/2} W D^{-1/2}` with the second largest eigenvalue; the
//! largest is always 1 with eigenvector `D^{1/2} 1`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

/// Above this size the eigenvector is approximated by Lanczos iteration.
const DENSE_LIMIT: usize = 300;
const LANCZOS_STEPS: usize = 100;

/// Local adjacency lists of a subgraph, indices `0..n`.
pub(crate) type LocalAdjacency = Vec<Vec<(usize, f64)>>;

fn inv_sqrt_degrees(adj: &LocalAdjacency) -> (Vec<f64>, Vec<f64>) {
    let deg: Vec<f64> = adj
        .iter()
        .map(|l| l.iter().map(|&(_, w)| w).sum())
        .collect();
    let mean = deg.iter().sum::<f64>() / deg.len().max(1) as f64;
    let floor = (mean * 1e-12).max(f64::MIN_POSITIVE);
    let deg: Vec<f64> = deg.into_iter().map(|d| d.max(floor)).collect();
    let inv = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    (deg, inv)
}

fn apply_normalized(adj: &LocalAdjacency, inv_sqrt: &[f64], x: &DVector<f64>, out: &mut DVector<f64>) {
    for (i, list) in adj.iter().enumerate() {
        let mut acc = 0.0;
        for &(j, w) in list {
            acc += w * inv_sqrt[j] * x[j];
        }
        out[i] = acc * inv_sqrt[i];
    }
}

/// Returns the generalized Fiedler vector `y` of the subgraph.
pub(crate) fn fiedler_vector<R: Rng>(adj: &LocalAdjacency, rng: &mut R) -> Vec<f64> {
    let n = adj.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let (deg, inv_sqrt) = inv_sqrt_degrees(adj);
    let z = if n <= DENSE_LIMIT {
        dense_second_eigenvector(adj, &inv_sqrt)
    } else {
        lanczos_second_eigenvector(adj, &deg, &inv_sqrt, rng)
    };
    z.iter().zip(&inv_sqrt).map(|(z, s)| z * s).collect()
}

fn dense_second_eigenvector(adj: &LocalAdjacency, inv_sqrt: &[f64]) -> DVector<f64> {
    let n = adj.len();
    let mut m = DMatrix::zeros(n, n);
    for (i, list) in adj.iter().enumerate() {
        for &(j, w) in list {
            m[(i, j)] = w * inv_sqrt[i] * inv_sqrt[j];
        }
    }
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    eig.eigenvectors.column(order[1]).into_owned()
}

fn lanczos_second_eigenvector<R: Rng>(
    adj: &LocalAdjacency,
    deg: &[f64],
    inv_sqrt: &[f64],
    rng: &mut R,
) -> DVector<f64> {
    let n = adj.len();
    let mut top = DVector::from_iterator(n, deg.iter().map(|d| d.sqrt()));
    top.normalize_mut();

    let orthogonalize = |v: &mut DVector<f64>, basis: &[DVector<f64>], top: &DVector<f64>| {
        // two passes keep the Krylov basis orthogonal to working precision
        for _ in 0..2 {
            let c = top.dot(v);
            v.axpy(-c, top, 1.0);
            for q in basis {
                let c = q.dot(v);
                v.axpy(-c, q, 1.0);
            }
        }
    };

    let mut q = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    orthogonalize(&mut q, &[], &top);
    q.normalize_mut();

    let steps = LANCZOS_STEPS.min(n - 1);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let mut w = DVector::zeros(n);
    for _ in 0..steps {
        apply_normalized(adj, inv_sqrt, &q, &mut w);
        let a = q.dot(&w);
        alpha.push(a);
        basis.push(q.clone());
        orthogonalize(&mut w, &basis, &top);
        let b = w.norm();
        if b < 1e-12 || basis.len() == steps {
            break;
        }
        beta.push(b);
        q = &w / b;
    }

    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let best = (0..m)
        .max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
        .unwrap_or(0);
    let s = eig.eigenvectors.column(best);
    let mut z = DVector::zeros(n);
    for (k, qk) in basis.iter().enumerate() {
        z.axpy(s[k], qk, 1.0);
    }
    z
}

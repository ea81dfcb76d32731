//! Independent reference implementations used as test oracles. None of
//! these call into the library code they check.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use njcr_core::{PixelMatrix, UnionDictionary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex(v: &DVector<f64>) -> DVector<f64> {
    let mut u: Vec<f64> = v.iter().copied().collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumulative += uj;
        let t = (cumulative - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.map(|x| (x - theta).max(0.0))
}

/// `k(x,x) - 2 a^T g + a^T G a + lambda/2 |a|^2`.
pub fn column_objective(kxx: f64, g: &DVector<f64>, gram: &DMatrix<f64>, a: &DVector<f64>, lambda: f64) -> f64 {
    kxx - 2.0 * a.dot(g) + a.dot(&(gram * a)) + 0.5 * lambda * a.norm_squared()
}

/// Minimizes the column objective over the simplex with accelerated
/// projected gradient, until successive iterates move less than `tol`.
pub fn simplex_qp(g: &DVector<f64>, gram: &DMatrix<f64>, lambda: f64, tol: f64) -> DVector<f64> {
    let k = g.len();
    let eig = gram.clone().symmetric_eigenvalues();
    let lipschitz = 2.0 * eig.max().max(0.0) + lambda;
    let step = 1.0 / lipschitz;
    let mut a = DVector::from_element(k, 1.0 / k as f64);
    let mut y = a.clone();
    let mut t = 1.0f64;
    for _ in 0..200_000 {
        let grad = gram * &y * 2.0 - g * 2.0 + &y * lambda;
        let next = project_simplex(&(&y - grad * step));
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        y = &next + (&next - &a) * ((t - 1.0) / t_next);
        let moved = (&next - &a).norm();
        a = next;
        t = t_next;
        if moved < tol {
            break;
        }
    }
    a
}

/// Random problem with pixels drawn as noisy convex mixtures of atoms,
/// spectra in `[0, 1]`.
pub fn mixture_instance(seed: u64, l: usize, k: usize, n: usize) -> (PixelMatrix, UnionDictionary) {
    let mut r = rng(seed);
    let d = DMatrix::from_fn(l, k, |_, _| r.gen_range(0.0..1.0));
    let mut x = DMatrix::zeros(l, n);
    for j in 0..n {
        let mut w: Vec<f64> = (0..k).map(|_| r.gen_range(0.0..1.0f64).powi(4)).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        for i in 0..l {
            let mix: f64 = (0..k).map(|c| d[(i, c)] * w[c]).sum();
            x[(i, j)] = mix + r.gen_range(-0.05..0.05);
        }
    }
    let kb = k - k / 4;
    (
        PixelMatrix::from_columns(x).unwrap(),
        UnionDictionary::from_matrix(d, kb.max(1)).unwrap(),
    )
}

/// Weighted edge list as a dense symmetric matrix.
pub fn dense_weights(n: usize, edges: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(n, n);
    for &(i, j, v) in edges {
        w[(i, j)] += v;
        w[(j, i)] += v;
    }
    w
}

/// `cut(A, B)` by double loop over the dense weight matrix.
pub fn brute_cut(w: &DMatrix<f64>, in_a: &[bool]) -> f64 {
    let n = w.nrows();
    let mut cut = 0.0;
    for i in 0..n {
        for j in 0..n {
            if in_a[i] && !in_a[j] {
                cut += w[(i, j)];
            }
        }
    }
    cut
}

/// `cut/assoc(A,V) + cut/assoc(B,V)`, infinite when a side has no
/// association.
pub fn brute_ncut(w: &DMatrix<f64>, in_a: &[bool]) -> f64 {
    let n = w.nrows();
    let cut = brute_cut(w, in_a);
    let mut assoc_a = 0.0;
    let mut assoc_b = 0.0;
    for i in 0..n {
        for j in 0..n {
            if in_a[i] {
                assoc_a += w[(i, j)];
            } else {
                assoc_b += w[(i, j)];
            }
        }
    }
    if assoc_a == 0.0 || assoc_b == 0.0 {
        return f64::INFINITY;
    }
    cut / assoc_a + cut / assoc_b
}

/// Density-peak quantities by direct double loops.
pub fn brute_density(points: &DMatrix<f64>, cutoff: f64) -> (Vec<f64>, Vec<f64>) {
    let n = points.ncols();
    let dist = |i: usize, j: usize| -> f64 {
        (0..points.nrows())
            .map(|r| (points[(r, i)] - points[(r, j)]).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let mut gamma = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                gamma[i] += (-(dist(i, j) / cutoff).powi(2)).exp();
            }
        }
    }
    let mut delta = vec![0.0; n];
    for i in 0..n {
        let mut best = f64::INFINITY;
        let mut is_peak = true;
        for j in 0..n {
            let higher = gamma[j] > gamma[i] || (gamma[j] == gamma[i] && j < i);
            if j != i && higher {
                is_peak = false;
                best = best.min(dist(i, j));
            }
        }
        delta[i] = if is_peak {
            (0..n).map(|j| dist(i, j)).fold(0.0, f64::max)
        } else {
            best
        };
    }
    (gamma, delta)
}

/// `(pf, pd)` at every candidate threshold, by counting.
pub fn brute_roc(scores: &[f64], truth: &[bool]) -> Vec<(f64, f64, f64)> {
    let mut taus: Vec<f64> = scores.to_vec();
    taus.sort_by(|a, b| b.total_cmp(a));
    taus.dedup();
    let anomalies = truth.iter().filter(|&&t| t).count() as f64;
    let background = truth.len() as f64 - anomalies;
    taus.into_iter()
        .map(|tau| {
            let mut hit = 0.0;
            let mut fa = 0.0;
            for (&s, &t) in scores.iter().zip(truth) {
                if s >= tau {
                    if t {
                        hit += 1.0;
                    } else {
                        fa += 1.0;
                    }
                }
            }
            (tau, fa / background, hit / anomalies)
        })
        .collect()
}

/// Trapezoid area under `(pf, pd)` with the `(0,0)` start point.
pub fn brute_auc(points: &[(f64, f64, f64)]) -> f64 {
    let mut area = 0.0;
    let (mut x0, mut y0) = (0.0, 0.0);
    for &(_, x, y) in points {
        area += (x - x0) * (y + y0) / 2.0;
        x0 = x;
        y0 = y;
    }
    area
}

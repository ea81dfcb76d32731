//! Density-peak scoring for picking representative pixels.
//!
//! Each point gets a Gaussian local density `gamma_i = sum_{j != i}
//! exp(-d_ij^2 / d_c^2)` and a separation `delta_i`, its distance to the
//! nearest denser point. Points scoring high on both are cluster centres.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::quantile;

/// Default cutoff quantile of the off-diagonal distances.
pub const DEFAULT_CUTOFF_QUANTILE: f64 = 0.02;

/// Local densities and separations of a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
    pub cutoff: f64,
}

/// Euclidean distance matrix of the columns of `points`.
pub fn pairwise_distances(points: &DMatrix<f64>) -> DMatrix<f64> {
    let n = points.ncols();
    let mut d = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in (j + 1)..n {
            let v = points
                .column(i)
                .iter()
                .zip(points.column(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

fn check_square(distances: &DMatrix<f64>) -> Result<()> {
    if !distances.is_square() {
        return Err(Error::Mismatch(format!(
            "distance matrix must be square, got {:?}",
            distances.shape()
        )));
    }
    Ok(())
}

/// Gaussian local density with the self term excluded.
pub fn local_density(distances: &DMatrix<f64>, cutoff: f64) -> Result<Vec<f64>> {
    check_square(distances)?;
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "cutoff distance must be positive, got {cutoff}"
        )));
    }
    let n = distances.nrows();
    let inv = 1.0 / (cutoff * cutoff);
    Ok((0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| (-distances[(i, j)].powi(2) * inv).exp())
                .sum()
        })
        .collect())
}

/// `true` when point `j` ranks denser than point `i` (ties go to the lower index).
fn denser(gamma: &[f64], j: usize, i: usize) -> bool {
    gamma[j] > gamma[i] || (gamma[j] == gamma[i] && j < i)
}

/// Distance to the nearest denser point; the densest point gets its
/// largest distance to any other point.
pub fn min_higher_density_distance(distances: &DMatrix<f64>, gamma: &[f64]) -> Result<Vec<f64>> {
    check_square(distances)?;
    let n = distances.nrows();
    if gamma.len() != n {
        return Err(Error::Mismatch(format!(
            "{} densities for {n} points",
            gamma.len()
        )));
    }
    if let Some(i) = gamma.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok((0..n)
        .map(|i| {
            let nearest = (0..n)
                .filter(|&j| denser(gamma, j, i))
                .map(|j| distances[(i, j)])
                .min_by(f64::total_cmp);
            nearest.unwrap_or_else(|| {
                (0..n)
                    .map(|j| distances[(i, j)])
                    .max_by(f64::total_cmp)
                    .unwrap_or(0.0)
            })
        })
        .collect())
}

/// The `quantile` of the off-diagonal distances, floored at a tiny positive
/// scale. A single point gets cutoff 1.
pub fn cutoff_distance(distances: &DMatrix<f64>, q: f64) -> f64 {
    let n = distances.nrows();
    let mut off: Vec<f64> = (0..n)
        .flat_map(|j| ((j + 1)..n).map(move |i| (i, j)))
        .map(|(i, j)| distances[(i, j)])
        .collect();
    let max = off.iter().copied().fold(0.0f64, f64::max);
    match quantile(&mut off, q) {
        Some(v) => v.max(f64::EPSILON * max.max(1.0)),
        None => 1.0,
    }
}

/// Full density profile of `points` with the cutoff at quantile `q`.
pub fn density_profile(points: &DMatrix<f64>, q: f64) -> Result<DensityProfile> {
    let d = pairwise_distances(points);
    let cutoff = cutoff_distance(&d, q);
    let gamma = local_density(&d, cutoff)?;
    let delta = min_higher_density_distance(&d, &gamma)?;
    Ok(DensityProfile {
        gamma,
        delta,
        cutoff,
    })
}

/// Indices of the `m` columns with the largest `gamma * delta`, in
/// decreasing score order (ties by index).
pub fn select_representatives(points: &DMatrix<f64>, m: usize, q: f64) -> Result<Vec<usize>> {
    let n = points.ncols();
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!(
            "cannot select {m} representatives from {n} points"
        )));
    }
    let profile = density_profile(points, q)?;
    let mut order: Vec<usize> = (0..n).collect();
    let score = |i: usize| profile.gamma[i] * profile.delta[i];
    order.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
    order.truncate(m);
    Ok(order)
}

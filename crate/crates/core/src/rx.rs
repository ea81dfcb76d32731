//! Global RX detector: squared Mahalanobis distance to the image mean.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::data::{PixelMatrix, ScoreMap};
use crate::error::{Error, Result};
use crate::linalg::{center_columns, factor_checked, row_means};

/// Default relative ridge applied to the covariance before factoring.
pub const DEFAULT_RIDGE_EPS: f64 = 1e-6;
const MAX_RIDGE_ESCALATIONS: usize = 20;

/// Mean, covariance and its Cholesky factor.
#[derive(Debug, Clone)]
pub struct BackgroundStats {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    ridge: f64,
}

impl BackgroundStats {
    /// Estimates statistics from the columns of `x`.
    ///
    /// With `ridge_eps > 0` the covariance is regularized by
    /// `ridge_eps * trace(C) / L` times the identity, escalated tenfold until
    /// the factorization succeeds. With `ridge_eps == 0` the raw covariance
    /// must be positive definite.
    pub fn fit(x: &PixelMatrix, ridge_eps: f64) -> Result<Self> {
        let m = x.matrix();
        let (l, n) = m.shape();
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "RX statistics need at least 2 pixels, got {n}"
            )));
        }
        if !(ridge_eps >= 0.0 && ridge_eps.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ridge_eps must be non-negative, got {ridge_eps}"
            )));
        }
        let mean = row_means(m);
        let centered = center_columns(m, &mean);
        let cov = (&centered * centered.transpose()) / (n as f64 - 1.0);

        if ridge_eps == 0.0 {
            let factor = factor_checked(&cov).ok_or_else(|| {
                Error::Numerical("covariance is not positive definite and ridge_eps is 0".into())
            })?;
            return Ok(Self {
                mean,
                cov,
                factor,
                ridge: 0.0,
            });
        }

        let trace = cov.trace();
        let mut ridge = if trace > 0.0 {
            ridge_eps * trace / l as f64
        } else {
            ridge_eps
        };
        for _ in 0..MAX_RIDGE_ESCALATIONS {
            let mut regularized = cov.clone();
            for i in 0..l {
                regularized[(i, i)] += ridge;
            }
            if let Some(factor) = factor_checked(&regularized) {
                return Ok(Self {
                    mean,
                    cov,
                    factor,
                    ridge,
                });
            }
            ridge *= 10.0;
        }
        Err(Error::Numerical(format!(
            "covariance factorization failed up to ridge {ridge:e}"
        )))
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Unregularized sample covariance.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Ridge actually added to the diagonal.
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn bands(&self) -> usize {
        self.mean.len()
    }

    /// Squared Mahalanobis distance of one spectrum.
    pub fn mahalanobis_sq(&self, x: &DVector<f64>) -> f64 {
        // C = L L^T, so d^T C^-1 d = |L^-1 d|^2
        let mut z = x - &self.mean;
        self.factor.l().solve_lower_triangular_mut(&mut z);
        z.norm_squared()
    }
}

/// RX scores of every pixel in `x`.
pub fn rx_scores(x: &PixelMatrix, stats: &BackgroundStats) -> Result<ScoreMap> {
    if x.bands() != stats.bands() {
        return Err(Error::Mismatch(format!(
            "pixels have {} bands, statistics {}",
            x.bands(),
            stats.bands()
        )));
    }
    let m = x.matrix();
    let centered = center_columns(m, &stats.mean);
    let lower = stats.factor.l();
    let scores: Vec<f64> = (0..m.ncols())
        .into_par_iter()
        .map(|j| {
            let mut z = centered.column(j).into_owned();
            lower.solve_lower_triangular_mut(&mut z);
            z.norm_squared()
        })
        .collect();
    ScoreMap::new(x.width(), x.height(), scores)
}

/// Fits statistics on `x` and scores it.
pub fn rx_detect(x: &PixelMatrix, ridge_eps: f64) -> Result<(ScoreMap, BackgroundStats)> {
    let stats = BackgroundStats::fit(x, ridge_eps)?;
    Ok((rx_scores(x, &stats)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm(rows: usize, cols: usize, data: &[f64]) -> PixelMatrix {
        PixelMatrix::from_columns(DMatrix::from_column_slice(rows, cols, data)).unwrap()
    }

    #[test]
    fn two_pixel_statistics() {
        let x = pm(2, 2, &[0.0, 0.0, 2.0, 2.0]);
        let s = BackgroundStats::fit(&x, 0.0).err();
        // rank-one covariance [[2,2],[2,2]] is singular without a ridge
        assert!(s.is_some());
        let s = BackgroundStats::fit(&x, 1e-6).unwrap();
        assert_eq!(s.mean().as_slice(), &[1.0, 1.0]);
        assert_eq!(s.covariance(), &DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0]));
        assert!(s.ridge() > 0.0);
    }

    #[test]
    fn constant_image_gets_a_ridge() {
        let x = pm(3, 4, &[0.5; 12]);
        let s = BackgroundStats::fit(&x, 1e-6).unwrap();
        assert!(s.ridge() > 0.0);
        let r = rx_scores(&x, &s).unwrap();
        assert!(r.scores().iter().all(|&v| v == 0.0));
        assert!(BackgroundStats::fit(&x, 0.0).is_err());
    }

    #[test]
    fn too_few_pixels_and_band_mismatch() {
        assert!(BackgroundStats::fit(&pm(2, 1, &[1.0, 2.0]), 1e-6).is_err());
        let s = BackgroundStats::fit(&pm(1, 3, &[0.0, 1.0, 2.0]), 0.0).unwrap();
        assert!(rx_scores(&pm(2, 1, &[1.0, 2.0]), &s).is_err());
    }

    #[test]
    fn mean_pixel_scores_zero() {
        let x = pm(1, 3, &[0.0, 1.0, 2.0]);
        let (r, s) = rx_detect(&x, 0.0).unwrap();
        assert_eq!(r.scores()[1], 0.0);
        assert_eq!(s.mahalanobis_sq(&DVector::from_element(1, 1.0)), 0.0);
    }
}

//! Kernel functions and cached Gram matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel used by the representation model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    /// `k(x, y) = x^T y`.
    Linear,
    /// `k(x, y) = exp(-|x - y|^2 / (2 sigma^2))`.
    Rbf { sigma: f64 },
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::Rbf { sigma: 4.0 }
    }
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Linear => Ok(()),
            Kernel::Rbf { sigma } if sigma > 0.0 && sigma.is_finite() => Ok(()),
            Kernel::Rbf { sigma } => Err(Error::InvalidParameter(format!(
                "RBF width must be positive, got {sigma}"
            ))),
        }
    }

    /// Cross-Gram matrix between the columns of `p` and `q`.
    pub fn gram(&self, p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if p.nrows() != q.nrows() {
            return Err(Error::Mismatch(format!(
                "kernel arguments have {} and {} bands",
                p.nrows(),
                q.nrows()
            )));
        }
        match *self {
            Kernel::Linear => Ok(linear_gram(p, q)),
            Kernel::Rbf { sigma } => rbf_gram(p, q, sigma),
        }
    }

    /// `k(x, x)` for every column of `x`.
    pub fn diagonal(&self, x: &DMatrix<f64>) -> Vec<f64> {
        match self {
            Kernel::Linear => x.column_iter().map(|c| c.norm_squared()).collect(),
            Kernel::Rbf { .. } => vec![1.0; x.ncols()],
        }
    }
}

/// `P^T Q`.
pub fn linear_gram(p: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    p.tr_mul(q)
}

/// RBF Gram matrix of the columns of `p` (`L x a`) against `q` (`L x b`).
pub fn rbf_gram(p: &DMatrix<f64>, q: &DMatrix<f64>, sigma: f64) -> Result<DMatrix<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "RBF width must be positive, got {sigma}"
        )));
    }
    if p.nrows() != q.nrows() {
        return Err(Error::Mismatch(format!(
            "kernel arguments have {} and {} bands",
            p.nrows(),
            q.nrows()
        )));
    }
    let scale = 1.0 / (2.0 * sigma * sigma);
    Ok(DMatrix::from_fn(p.ncols(), q.ncols(), |i, j| {
        let d2: f64 = p
            .column(i)
            .iter()
            .zip(q.column(j).iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        (-d2 * scale).exp()
    }))
}

/// Gram matrices of a dictionary against itself and against the image.
#[derive(Debug, Clone)]
pub struct KernelCache {
    /// `K x K` dictionary Gram matrix.
    pub k_dd: DMatrix<f64>,
    /// `K x N` dictionary-to-pixel Gram matrix.
    pub k_dx: DMatrix<f64>,
    /// `k(x_i, x_i)` per pixel.
    pub k_diag_x: Vec<f64>,
}

impl KernelCache {
    pub fn new(kernel: &Kernel, d: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<Self> {
        kernel.validate()?;
        Ok(Self {
            k_dd: kernel.gram(d, d)?,
            k_dx: kernel.gram(d, x)?,
            k_diag_x: kernel.diagonal(x),
        })
    }
}

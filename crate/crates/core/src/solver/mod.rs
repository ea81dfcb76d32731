//! Nonnegative-constrained joint collaborative representation (NJCR) and its
//! kernel form (KNJCR), with residual-based anomaly scoring.

mod admm;
mod kernel;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use admm::{Admm, AdmmState, ConvergenceReport, IterationResidual};
pub use kernel::{linear_gram, rbf_gram, Kernel, KernelCache};

use crate::data::{PixelMatrix, ScoreMap};
use crate::dictionary::UnionDictionary;
use crate::error::{Error, Result};

/// Which constraints the representation enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Constraints {
    pub nonnegative: bool,
    pub sum_to_one: bool,
}

impl Default for Constraints {
    fn default() -> Self {
        Self {
            nonnegative: true,
            sum_to_one: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Frobenius regularization weight.
    pub lambda: f64,
    /// ADMM penalty (step size).
    pub rho: f64,
    /// Tolerance on the primal and dual residual norms.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Kernel for the kernel model; the linear model ignores it.
    pub kernel: Kernel,
    pub constraints: Constraints,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            rho: 1.0,
            epsilon: 1e-4,
            max_iter: 1000,
            kernel: Kernel::default(),
            constraints: Constraints::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rho must be positive, got {}",
                self.rho
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        self.kernel.validate()
    }
}

/// The `K x N` coefficient matrix, one column per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix(pub DMatrix<f64>);

impl CoefficientMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn min_entry(&self) -> f64 {
        self.0.min()
    }

    /// Largest `|sum_i A_ij - 1|` over columns.
    pub fn max_sum_violation(&self) -> f64 {
        self.0
            .column_iter()
            .map(|c| (c.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Coefficients and convergence report of a solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub coefficients: CoefficientMatrix,
    pub report: ConvergenceReport,
}

fn check_dims(x: &PixelMatrix, d: &UnionDictionary) -> Result<()> {
    if x.bands() != d.bands() {
        return Err(Error::Mismatch(format!(
            "image has {} bands, dictionary {}",
            x.bands(),
            d.bands()
        )));
    }
    if d.is_empty() {
        return Err(Error::Dimensions("empty dictionary".into()));
    }
    if x.matrix().iter().chain(d.atoms().iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite input".into()));
    }
    Ok(())
}

/// Solves the linear model with extended ADMM.
pub fn solve_njcr(x: &PixelMatrix, d: &UnionDictionary, cfg: &SolverConfig) -> Result<Solution> {
    check_dims(x, d)?;
    let cross = linear_gram(d.atoms(), x.matrix());
    let (a, report) = Admm::with_features(d.atoms(), &cross, cfg)?.run();
    Ok(Solution {
        coefficients: CoefficientMatrix(a),
        report,
    })
}

/// Solves the kernel model with extended ADMM using `cfg.kernel`.
pub fn solve_knjcr(x: &PixelMatrix, d: &UnionDictionary, cfg: &SolverConfig) -> Result<Solution> {
    check_dims(x, d)?;
    let cache = KernelCache::new(&cfg.kernel, d.atoms(), x.matrix())?;
    solve_gram(&cache.k_dd, &cache.k_dx, cfg)
}

/// Runs the ADMM on precomputed Gram matrices.
pub fn solve_gram(
    gram: &DMatrix<f64>,
    cross: &DMatrix<f64>,
    cfg: &SolverConfig,
) -> Result<Solution> {
    let (a, report) = Admm::new(gram, cross, cfg)?.run();
    Ok(Solution {
        coefficients: CoefficientMatrix(a),
        report,
    })
}

/// Per-column objective `k(x,x) - 2 a^T g + a^T G a + lambda/2 |a|^2`.
pub fn column_objectives(
    gram: &DMatrix<f64>,
    cross: &DMatrix<f64>,
    diag_x: &[f64],
    a: &DMatrix<f64>,
    lambda: f64,
) -> Vec<f64> {
    let ga = gram * a;
    (0..a.ncols())
        .map(|j| {
            let aj = a.column(j);
            diag_x[j] - 2.0 * aj.dot(&cross.column(j))
                + aj.dot(&ga.column(j))
                + 0.5 * lambda * aj.norm_squared()
        })
        .collect()
}

/// Unconstrained collaborative representation `(D^T D + lambda I)^-1 D^T x`.
pub fn cr_closed_form(x: &DVector<f64>, d: &DMatrix<f64>, lambda: f64) -> Result<DVector<f64>> {
    if x.len() != d.nrows() {
        return Err(Error::Mismatch(format!(
            "pixel has {} bands, dictionary {}",
            x.len(),
            d.nrows()
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }
    let mut g = d.tr_mul(d);
    for i in 0..g.nrows() {
        g[(i, i)] += lambda;
    }
    let chol = crate::linalg::factor_checked(&g)
        .ok_or_else(|| Error::Numerical("CR normal equations are singular".into()))?;
    Ok(chol.solve(&d.tr_mul(x)))
}

fn check_coefficients(d: &UnionDictionary, a: &CoefficientMatrix, n: usize) -> Result<()> {
    if a.0.nrows() != d.len() || a.0.ncols() != n {
        return Err(Error::Mismatch(format!(
            "coefficients are {:?}, expected {}x{n}",
            a.0.shape(),
            d.len()
        )));
    }
    Ok(())
}

/// Residual `|x_i - D_B a_i,B|_2` of every pixel against the background
/// atoms only.
pub fn score_njcr(
    x: &PixelMatrix,
    d: &UnionDictionary,
    a: &CoefficientMatrix,
) -> Result<ScoreMap> {
    check_coefficients(d, a, x.pixel_count())?;
    let kb = d.k_background();
    let recon = d.atoms().columns(0, kb) * a.0.rows(0, kb);
    let scores = (x.matrix() - recon)
        .column_iter()
        .map(|c| c.norm())
        .collect();
    ScoreMap::new(x.width(), x.height(), scores)
}

/// Feature-space residual of every pixel against the background atoms,
/// by kernel expansion `k(x,x) - 2 k_Bx^T a_B + a_B^T K_BB a_B`.
pub fn score_knjcr(
    x: &PixelMatrix,
    d: &UnionDictionary,
    a: &CoefficientMatrix,
    kernel: &Kernel,
) -> Result<ScoreMap> {
    check_coefficients(d, a, x.pixel_count())?;
    let kb = d.k_background();
    let db = d.atoms().columns(0, kb).into_owned();
    let k_bb = kernel.gram(&db, &db)?;
    let k_bx = kernel.gram(&db, x.matrix())?;
    let diag = kernel.diagonal(x.matrix());
    let a_b = a.0.rows(0, kb);
    let k_a = &k_bb * a_b;
    let scores = (0..x.pixel_count())
        .map(|j| {
            let aj = a_b.column(j);
            let sq = diag[j] - 2.0 * aj.dot(&k_bx.column(j)) + aj.dot(&k_a.column(j));
            sq.max(0.0).sqrt()
        })
        .collect();
    ScoreMap::new(x.width(), x.height(), scores)
}

/// Which representation model to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Njcr,
    Knjcr,
}

/// Solves and scores in one go.
pub fn detect(
    x: &PixelMatrix,
    d: &UnionDictionary,
    cfg: &SolverConfig,
    model: Model,
) -> Result<(ScoreMap, Solution)> {
    match model {
        Model::Njcr => {
            let sol = solve_njcr(x, d, cfg)?;
            Ok((score_njcr(x, d, &sol.coefficients)?, sol))
        }
        Model::Knjcr => {
            let sol = solve_knjcr(x, d, cfg)?;
            Ok((score_knjcr(x, d, &sol.coefficients, &cfg.kernel)?, sol))
        }
    }
}

//! Extended ADMM for the nonnegative, sum-to-one constrained joint
//! representation problem
//!
//! ```text
//! min_A  sum_i [k(x_i, x_i) - 2 a_i^T g_i + a_i^T G a_i] + lambda/2 |A|_F^2
//! s.t.   A^T 1_K = 1_N,  A >= 0
//! ```
//!
//! where `G` is the dictionary Gram matrix and `g_i` the i-th column of the
//! dictionary-to-pixel Gram matrix. With the linear kernel this is
//! `|X - DA|_F^2 + lambda/2 |A|_F^2`. A slack copy `omega` of `A` carries
//! the nonnegativity; `delta` and `eta` are the scaled multipliers of
//! `A = omega` and the sum-to-one constraint.
//!
//! Every iteration solves
//!
//! ```text
//! (2G + (lambda + rho) I + rho 1 1^T) A = 2 C - rho (delta - omega - 1 1^T + 1 eta^T)
//! omega <- (A + delta)_+
//! delta <- delta + A - omega
//! eta   <- eta + A^T 1 - 1
//! ```
//!
//! and stops once both `|r|_F` and `|s|_F` drop to `epsilon`, where
//! `r = [A^T 1 - 1; A - omega]` and `s = -rho (omega_new - omega_old)`.

use nalgebra::{Cholesky, DMatrix, DMatrixViewMut, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::{Constraints, SolverConfig};
use crate::error::{Error, Result};

/// Residual norms of one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationResidual {
    pub primal: f64,
    pub dual: f64,
}

/// Outcome of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub history: Vec<IterationResidual>,
}

/// Columns per block of an iteration.
const BLOCK_COLUMNS: usize = 64;

/// Iterates of the ADMM.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub a: DMatrix<f64>,
    pub omega: DMatrix<f64>,
    pub delta: DMatrix<f64>,
    /// One sum-to-one multiplier per pixel.
    pub eta: DVector<f64>,
    pub iter: usize,
    pub primal_residual_norm: f64,
    pub dual_residual_norm: f64,
}

/// How the A-update applies the inverse system matrix.
#[derive(Debug, Clone)]
enum SolveOp {
    /// Explicit `K x K` inverse.
    Dense(DMatrix<f64>),
    /// `S^-1 R = R / c - V (U^T R)` for `S = c I + U W U^T` with `U` of
    /// rank `r < K`; `ut` stores `U^T`.
    LowRank {
        ut: DMatrix<f64>,
        v: DMatrix<f64>,
        inv_c: f64,
    },
}

impl SolveOp {
    /// Writes `S^-1 rhs` into `out`; `rhs` is clobbered.
    fn solve(&self, rhs: &mut DMatrix<f64>, proj: &mut DMatrix<f64>, out: &mut DMatrixViewMut<'_, f64>) {
        match self {
            SolveOp::Dense(inv) => out.gemm(1.0, inv, rhs, 0.0),
            SolveOp::LowRank { ut, v, inv_c } => {
                proj.gemm(1.0, ut, rhs, 0.0);
                rhs.gemm(-1.0, v, proj, *inv_c);
                out.copy_from(rhs);
            }
        }
    }

    fn rank(&self) -> usize {
        match self {
            SolveOp::Dense(_) => 0,
            SolveOp::LowRank { ut, .. } => ut.nrows(),
        }
    }
}

/// An ADMM run over a fixed Gram system.
#[derive(Debug, Clone)]
pub struct Admm {
    cfg: SolverConfig,
    system: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    solve_op: SolveOp,
    two_cross: DMatrix<f64>,
    state: AdmmState,
    history: Vec<IterationResidual>,
}

impl Admm {
    /// Prepares a run for Gram matrix `gram` (`K x K`) and cross-Gram
    /// `cross` (`K x N`). The system matrix is factored here, once.
    pub fn new(gram: &DMatrix<f64>, cross: &DMatrix<f64>, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let k = gram.nrows();
        if k == 0 || !gram.is_square() {
            return Err(Error::Dimensions(format!(
                "Gram matrix must be square and non-empty, got {:?}",
                gram.shape()
            )));
        }
        if cross.nrows() != k {
            return Err(Error::Mismatch(format!(
                "cross-Gram has {} rows, dictionary has {k} atoms",
                cross.nrows()
            )));
        }
        if gram.iter().chain(cross.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite Gram entries".into()));
        }
        let Constraints {
            nonnegative,
            sum_to_one,
        } = cfg.constraints;
        let rho = cfg.rho;
        let shift = cfg.lambda + if nonnegative { rho } else { 0.0 };
        let mut base = gram * 2.0;
        for i in 0..k {
            base[(i, i)] += shift;
        }
        let mut factor = Cholesky::new(base.clone())
            .ok_or_else(|| Error::Numerical("ADMM system matrix is not positive definite".into()))?;
        let mut system = base;
        if sum_to_one {
            let ones = DVector::from_element(k, 1.0);
            factor.rank_one_update(&ones, rho);
            system.add_scalar_mut(rho);
        }
        // Every iteration applies the same inverse to a K x N block; forming it
        // once from the factor turns each solve into a single matrix product.
        let solve_op = SolveOp::Dense(factor.inverse());
        Ok(Self::assemble(cfg, system, factor, solve_op, cross))
    }

    /// Like [`Admm::new`] for a Gram matrix `F^T F` given its feature matrix
    /// `F` (`r x K`). When `r + 1` is well below `K` each solve goes through
    /// the Woodbury identity, costing `O(rKN)` instead of `O(K^2 N)`.
    pub fn with_features(
        features: &DMatrix<f64>,
        cross: &DMatrix<f64>,
        cfg: &SolverConfig,
    ) -> Result<Self> {
        let gram = features.tr_mul(features);
        let mut admm = Self::new(&gram, cross, cfg)?;
        let k = gram.nrows();
        let Constraints {
            nonnegative,
            sum_to_one,
        } = cfg.constraints;
        let c = cfg.lambda + if nonnegative { cfg.rho } else { 0.0 };
        let r = features.nrows() + usize::from(sum_to_one);
        if c <= 0.0 || 2 * r >= k {
            return Ok(admm);
        }
        // S = c I + U W U^T with U = [F^T, 1] and W = diag(2, .., 2, rho)
        let mut u = DMatrix::zeros(k, r);
        u.columns_mut(0, features.nrows())
            .copy_from(&features.transpose());
        let mut w_inv = vec![0.5; features.nrows()];
        if sum_to_one {
            u.column_mut(r - 1).fill(1.0);
            w_inv.push(1.0 / cfg.rho);
        }
        let mut core = u.tr_mul(&u);
        for (i, wi) in w_inv.iter().enumerate() {
            core[(i, i)] += c * wi;
        }
        let Some(core) = Cholesky::new(core) else {
            return Ok(admm);
        };
        // V = U (c W^-1 + U^T U)^-1 / c
        let v = core.solve(&u.transpose()).transpose() / c;
        admm.solve_op = SolveOp::LowRank {
            ut: u.transpose(),
            v,
            inv_c: 1.0 / c,
        };
        Ok(admm)
    }

    fn assemble(
        cfg: &SolverConfig,
        system: DMatrix<f64>,
        factor: Cholesky<f64, Dyn>,
        solve_op: SolveOp,
        cross: &DMatrix<f64>,
    ) -> Self {
        let k = system.nrows();
        let n = cross.ncols();
        Self {
            cfg: cfg.clone(),
            system,
            factor,
            solve_op,
            two_cross: cross * 2.0,
            state: AdmmState {
                a: DMatrix::zeros(k, n),
                omega: DMatrix::zeros(k, n),
                delta: DMatrix::zeros(k, n),
                eta: DVector::zeros(n),
                iter: 0,
                primal_residual_norm: f64::INFINITY,
                dual_residual_norm: f64::INFINITY,
            },
            history: Vec::new(),
        }
    }

    pub fn state(&self) -> &AdmmState {
        &self.state
    }

    /// The assembled `K x K` system matrix.
    pub fn system_matrix(&self) -> &DMatrix<f64> {
        &self.system
    }

    /// Right-hand side of the A-update for the current multipliers.
    pub fn rhs(&self) -> DMatrix<f64> {
        let mut rhs = DMatrix::zeros(self.two_cross.nrows(), self.two_cross.ncols());
        self.fill_rhs(0, &mut rhs);
        rhs
    }

    /// Writes `2C - rho (delta - omega - 1 1^T + 1 eta^T)` for the columns
    /// starting at `first` into `rhs`.
    fn fill_rhs(&self, first: usize, rhs: &mut DMatrix<f64>) {
        let Constraints {
            nonnegative,
            sum_to_one,
        } = self.cfg.constraints;
        let rho = self.cfg.rho;
        let s = &self.state;
        let k = rhs.nrows();
        let range = first * k..(first + rhs.ncols()) * k;
        let columns = rhs
            .as_mut_slice()
            .chunks_exact_mut(k)
            .zip(self.two_cross.as_slice()[range.clone()].chunks_exact(k))
            .zip(s.delta.as_slice()[range.clone()].chunks_exact(k))
            .zip(s.omega.as_slice()[range].chunks_exact(k));
        for (j, (((out, c), delta), omega)) in columns.enumerate() {
            let sum_term = if sum_to_one { s.eta[first + j] - 1.0 } else { 0.0 };
            if nonnegative {
                for i in 0..k {
                    out[i] = c[i] - rho * (delta[i] - omega[i] + sum_term);
                }
            } else {
                for i in 0..k {
                    out[i] = c[i] - rho * sum_term;
                }
            }
        }
    }

    /// Solves the system with the Cholesky factor directly (reference path).
    pub fn solve_with_factor(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.factor.solve(rhs)
    }

    /// Performs one iteration and returns its residual norms.
    ///
    /// Columns are independent, so the iteration runs over blocks of
    /// columns small enough to stay in cache between the solve and the
    /// multiplier updates.
    pub fn step(&mut self) -> IterationResidual {
        let Constraints {
            nonnegative,
            sum_to_one,
        } = self.cfg.constraints;
        let rho = self.cfg.rho;
        let (k, n) = self.two_cross.shape();
        let width = BLOCK_COLUMNS.min(n.max(1));
        let mut rhs = DMatrix::zeros(k, width);
        let mut proj = DMatrix::zeros(self.solve_op.rank(), width);
        let mut previous = DMatrix::zeros(if nonnegative { 0 } else { k }, width);
        let mut a = std::mem::take(&mut self.state.a);
        let mut primal_sq = 0.0;
        let mut dual_sq = 0.0;
        let mut first = 0;
        while first < n {
            let cols = width.min(n - first);
            if cols != rhs.ncols() {
                rhs = DMatrix::zeros(k, cols);
                proj = DMatrix::zeros(proj.nrows(), cols);
                previous = DMatrix::zeros(previous.nrows(), cols);
            }
            self.fill_rhs(first, &mut rhs);
            let mut block = a.columns_mut(first, cols);
            if !nonnegative {
                previous.copy_from(&block);
            }
            self.solve_op.solve(&mut rhs, &mut proj, &mut block);
            if !nonnegative {
                // without the slack, the dual residual tracks the change in A
                dual_sq += (&block - &previous).norm_squared();
            }

            let s = &mut self.state;
            let range = first * k..(first + cols) * k;
            let columns = a.as_slice()[range.clone()]
                .chunks_exact(k)
                .zip(s.omega.as_mut_slice()[range.clone()].chunks_exact_mut(k))
                .zip(s.delta.as_mut_slice()[range].chunks_exact_mut(k));
            for (j, ((col, omega), delta)) in columns.enumerate() {
                if nonnegative {
                    for i in 0..k {
                        let next = (col[i] + delta[i]).max(0.0);
                        let gap = col[i] - next;
                        let change = next - omega[i];
                        primal_sq += gap * gap;
                        dual_sq += change * change;
                        delta[i] += gap;
                        omega[i] = next;
                    }
                }
                if sum_to_one {
                    let violation = col.iter().sum::<f64>() - 1.0;
                    s.eta[first + j] += violation;
                    primal_sq += violation * violation;
                }
            }
            first += cols;
        }
        let s = &mut self.state;
        s.a = a;
        s.iter += 1;
        s.primal_residual_norm = primal_sq.sqrt();
        s.dual_residual_norm = rho * dual_sq.sqrt();
        let r = IterationResidual {
            primal: s.primal_residual_norm,
            dual: s.dual_residual_norm,
        };
        self.history.push(r);
        r
    }

    fn done(&self) -> bool {
        let s = &self.state;
        s.primal_residual_norm <= self.cfg.epsilon && s.dual_residual_norm <= self.cfg.epsilon
    }

    /// Iterates until both residuals reach `epsilon` or `max_iter` is hit.
    pub fn run(mut self) -> (DMatrix<f64>, ConvergenceReport) {
        let unconstrained = !self.cfg.constraints.nonnegative && !self.cfg.constraints.sum_to_one;
        if unconstrained {
            // nothing to split: the first A-update is the exact minimizer
            self.step();
            self.state.primal_residual_norm = 0.0;
            self.state.dual_residual_norm = 0.0;
        } else {
            while self.state.iter < self.cfg.max_iter && !self.done() {
                self.step();
            }
        }
        let converged = self.done();
        let report = ConvergenceReport {
            iterations: self.state.iter,
            converged,
            primal_residual: self.state.primal_residual_norm,
            dual_residual: self.state.dual_residual_norm,
            history: self.history,
        };
        (self.state.a, report)
    }
}

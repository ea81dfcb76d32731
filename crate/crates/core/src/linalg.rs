//! Small dense helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

/// Row means of an `L x N` matrix.
pub fn row_means(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.ncols() as f64;
    DVector::from_iterator(x.nrows(), x.row_iter().map(|r| r.sum() / n))
}

/// Subtracts `mean` from every column.
pub fn center_columns(x: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut c = x.clone();
    for mut col in c.column_iter_mut() {
        col -= mean;
    }
    c
}

/// Projects the columns of `x` onto its top `components` principal axes.
///
/// When `components >= L` the centered data is returned unchanged, which
/// preserves all pairwise distances.
pub fn pca_project(x: &DMatrix<f64>, components: usize) -> DMatrix<f64> {
    let mean = row_means(x);
    let centered = center_columns(x, &mean);
    if components >= x.nrows() || components == 0 {
        return centered;
    }
    let scatter = &centered * centered.transpose();
    let eig = SymmetricEigen::new(scatter);
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut basis = DMatrix::zeros(x.nrows(), components);
    for (k, &idx) in order.iter().take(components).enumerate() {
        basis.set_column(k, &eig.eigenvectors.column(idx));
    }
    basis.transpose() * centered
}

/// Linear-interpolation quantile of `values` (`q` in `[0, 1]`).
/// Sorts in place; returns `None` for an empty slice.
pub fn quantile(values: &mut [f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(values[lo] + (values[hi] - values[lo]) * frac)
}

/// Cholesky factor whose pivots are not negligible against the largest
/// diagonal entry; rounding lets exactly singular matrices factor otherwise.
pub(crate) fn factor_checked(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let scale = m.diagonal().max();
    let factor = Cholesky::new(m.clone())?;
    let l = factor.l_dirty();
    let tiny = scale * 1e-12;
    (0..m.nrows())
        .all(|i| l[(i, i)] * l[(i, i)] > tiny)
        .then_some(factor)
}

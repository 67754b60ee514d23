//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative threshold below which a mapped basis is treated as rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Relative eigenvalue floor used by the symmetric inverse square root.
pub const EIGEN_FLOOR: f64 = 1e-12;

pub fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite(format!("{what} (non-finite entries)")));
    }
    Cholesky::new(m.clone()).ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

/// `log det` of an SPD matrix from its Cholesky factor.
pub fn log_det_chol(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

pub fn log_det_spd(m: &DMatrix<f64>, what: &str) -> Result<f64> {
    Ok(log_det_chol(&cholesky(m, what)?))
}

/// Replaces `m` with `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Orthonormal basis for the column span of `cols`, via column-pivoted QR.
///
/// Fails when the columns are numerically dependent: the smallest pivot of R
/// relative to the largest falls below [`RANK_TOL`].
pub fn orthonormalize(cols: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n_rows, n_cols) = cols.shape();
    if n_cols == 0 {
        return Ok(DMatrix::zeros(n_rows, 0));
    }
    if n_cols > n_rows {
        return Err(Error::RankDeficient(0.0));
    }
    let qr = cols.clone().col_piv_qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..n_cols).map(|i| r[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min / max < RANK_TOL {
        return Err(Error::RankDeficient(if max > 0.0 { min / max } else { 0.0 }));
    }
    let q = qr.q();
    Ok(q.columns(0, n_cols).into_owned())
}

/// Symmetric inverse square root `Σ^{-1/2}` via eigendecomposition.
///
/// Eigenvalues are floored at `EIGEN_FLOOR · λ_max`.
pub fn sym_inv_sqrt(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !sigma.is_square() {
        return Err(Error::Dimension { expected: sigma.nrows(), found: sigma.ncols() });
    }
    // Reject non-SPD input up front.
    cholesky(sigma, "covariance")?;
    let eig = sigma.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let floor = EIGEN_FLOOR * lmax;
    let scaled = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| 1.0 / l.max(floor).sqrt()),
    );
    let q = &eig.eigenvectors;
    let mut out = q * DMatrix::from_diagonal(&scaled) * q.transpose();
    symmetrize(&mut out);
    Ok(out)
}

/// Largest absolute entry of `vᵀv - I`.
pub fn orthonormality_error(v: &DMatrix<f64>) -> f64 {
    let g = v.transpose() * v;
    let n = g.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Norm of the component of `y` orthogonal to the span of the orthonormal columns `v`.
pub fn residual_off_span(v: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    if v.ncols() == 0 {
        return y.norm();
    }
    let proj = v * (v.transpose() * y);
    (y - proj).norm()
}

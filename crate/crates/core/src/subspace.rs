//! Incomplete points as affine subspaces `x + V`.

use nalgebra::{DMatrix, DVector};

use crate::data::IncompletePoint;
use crate::error::{Error, Result};
use crate::linalg;

/// An affine subspace `base + span(basis)` with orthonormal basis columns.
///
/// `basis` has zero columns for a complete point and `N` columns for a fully
/// missing one.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingSubspacePoint {
    base: DVector<f64>,
    basis: DMatrix<f64>,
}

impl MissingSubspacePoint {
    /// Builds a subspace from a base point and any spanning set of `V`.
    pub fn new(base: DVector<f64>, spanning: &DMatrix<f64>) -> Result<Self> {
        if spanning.nrows() != base.len() {
            return Err(Error::Dimension { expected: base.len(), found: spanning.nrows() });
        }
        let basis = linalg::orthonormalize(spanning)?;
        Ok(Self { base, basis })
    }

    /// `x + span(e_j : j missing)`, with 0 placed on the missing base coordinates.
    pub fn from_incomplete(point: &IncompletePoint) -> Self {
        let n = point.dim();
        let base = DVector::from_iterator(n, (0..n).map(|j| point.get(j).unwrap_or(0.0)));
        let missing = point.missing();
        let mut basis = DMatrix::zeros(n, missing.len());
        for (k, &j) in missing.iter().enumerate() {
            basis[(j, k)] = 1.0;
        }
        Self { base, basis }
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    /// Dimension `n` of the linear part `V`.
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn base(&self) -> &DVector<f64> {
        &self.base
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Whether `y` lies in the subspace, up to `tol` in Euclidean distance.
    pub fn contains(&self, y: &DVector<f64>, tol: f64) -> bool {
        linalg::residual_off_span(&self.basis, &(y - &self.base)) < tol
    }

    /// Image under `w ↦ A w + b`: base `A x + b`, basis orthonormalized from `A v`.
    pub fn transform_affine(&self, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Self> {
        let n = self.dim();
        if a.shape() != (n, n) {
            return Err(Error::Dimension { expected: n, found: if a.nrows() != n { a.nrows() } else { a.ncols() } });
        }
        if b.len() != n {
            return Err(Error::Dimension { expected: n, found: b.len() });
        }
        let base = a * &self.base + b;
        let basis = linalg::orthonormalize(&(a * &self.basis))?;
        Ok(Self { base, basis })
    }

    /// `Σ^{-1/2}(x - m) + Σ^{-1/2} V`.
    pub fn whiten(&self, sigma: &DMatrix<f64>, mean: &DVector<f64>) -> Result<Self> {
        if mean.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: mean.len() });
        }
        let w = linalg::sym_inv_sqrt(sigma)?;
        let shift = -(&w * mean);
        self.transform_affine(&w, &shift)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_point_has_trivial_span() {
        let p = IncompletePoint::complete(vec![-1.0, -2.0]).unwrap();
        let s = MissingSubspacePoint::from_incomplete(&p);
        assert_eq!(s.base().as_slice(), &[-1.0, -2.0]);
        assert_eq!(s.rank(), 0);
    }

    #[test]
    fn missing_first_coordinate() {
        let p = IncompletePoint::from_options(&[None, Some(1.0)]).unwrap();
        let s = MissingSubspacePoint::from_incomplete(&p);
        assert_eq!(s.base().as_slice(), &[0.0, 1.0]);
        assert_eq!(s.basis().as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn fully_missing_is_identity_basis() {
        let p = IncompletePoint::from_options(&[None, None, None]).unwrap();
        let s = MissingSubspacePoint::from_incomplete(&p);
        assert_eq!(s.basis(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn identity_map_is_identity() {
        let p = IncompletePoint::from_options(&[None, Some(2.0), Some(-1.0)]).unwrap();
        let s = MissingSubspacePoint::from_incomplete(&p);
        let t = s.transform_affine(&DMatrix::identity(3, 3), &DVector::zeros(3)).unwrap();
        assert_eq!(t.base(), s.base());
        assert!(linalg::orthonormality_error(t.basis()) < 1e-14);
        assert!((t.basis()[(0, 0)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn scaling_preserves_span() {
        let p = IncompletePoint::from_options(&[Some(1.0), None]).unwrap();
        let s = MissingSubspacePoint::from_incomplete(&p);
        let t = s.transform_affine(&(DMatrix::identity(2, 2) * 2.0), &DVector::zeros(2)).unwrap();
        assert_eq!(t.base().as_slice(), &[2.0, 0.0]);
        assert!((t.basis()[(1, 0)].abs() - 1.0).abs() < 1e-14);
        assert!(t.basis()[(0, 0)].abs() < 1e-14);
    }

    #[test]
    fn singular_map_is_rejected() {
        let p = IncompletePoint::from_options(&[None, None]).unwrap();
        let s = MissingSubspacePoint::from_incomplete(&p);
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(s.transform_affine(&a, &DVector::zeros(2)), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn whiten_diagonal() {
        let p = IncompletePoint::complete(vec![2.0, 0.0]).unwrap();
        let s = MissingSubspacePoint::from_incomplete(&p);
        let sigma = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        let w = s.whiten(&sigma, &DVector::zeros(2)).unwrap();
        assert!((w.base()[0] - 1.0).abs() < 1e-15);
        assert!(w.base()[1].abs() < 1e-15);
    }

    #[test]
    fn whiten_by_identity_is_identity() {
        let p = IncompletePoint::from_options(&[Some(3.0), None]).unwrap();
        let s = MissingSubspacePoint::from_incomplete(&p);
        let w = s.whiten(&DMatrix::identity(2, 2), &DVector::zeros(2)).unwrap();
        assert_eq!(w.base(), s.base());
        assert!((w.basis()[(1, 0)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn whiten_rejects_non_spd() {
        let p = IncompletePoint::complete(vec![1.0, 1.0]).unwrap();
        let s = MissingSubspacePoint::from_incomplete(&p);
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(s.whiten(&sigma, &DVector::zeros(2)), Err(Error::NotPositiveDefinite(_))));
    }
}

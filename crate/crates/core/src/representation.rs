//! Degenerate-Gaussian representation of a subspace point.
//!
//! Given `F = N(m, Σ)` and `x + V` with orthonormal basis `v`, the restriction
//! of `F` to the subspace is `N(m_V, Σ_V)` in `v` coordinates with
//!
//! ```text
//! Σ_V = (vᵀ Σ⁻¹ v)⁻¹,    m_V = Σ_V vᵀ Σ⁻¹ (m - x),
//! ```
//!
//! and lifted back to `ℝᴺ` it is `N(x + v m_V, v Σ_V vᵀ)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::GaussianModel;
use crate::error::{Error, Result};
use crate::linalg;
use crate::subspace::MissingSubspacePoint;

/// `N(mean, basis · small_cov · basisᵀ)`, stored in factored form.
///
/// A rank-zero representation is the Dirac measure at `mean`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RepresentationJson", into = "RepresentationJson")]
pub struct PointRepresentation {
    mean: DVector<f64>,
    basis: DMatrix<f64>,
    small_cov: DMatrix<f64>,
}

impl PointRepresentation {
    pub fn dirac(x: DVector<f64>) -> Self {
        let n = x.len();
        Self { mean: x, basis: DMatrix::zeros(n, 0), small_cov: DMatrix::zeros(0, 0) }
    }

    /// Assembles a representation from parts; `basis` must be orthonormal and
    /// `small_cov` SPD.
    pub fn from_parts(mean: DVector<f64>, basis: DMatrix<f64>, small_cov: DMatrix<f64>) -> Result<Self> {
        if basis.nrows() != mean.len() {
            return Err(Error::Dimension { expected: mean.len(), found: basis.nrows() });
        }
        if small_cov.shape() != (basis.ncols(), basis.ncols()) {
            return Err(Error::Dimension { expected: basis.ncols(), found: small_cov.nrows() });
        }
        if linalg::orthonormality_error(&basis) > 1e-10 {
            return Err(Error::invalid("basis columns are not orthonormal"));
        }
        if basis.ncols() > 0 {
            linalg::cholesky(&small_cov, "conditional covariance")?;
        }
        Ok(Self { mean, basis, small_cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_dirac(&self) -> bool {
        self.rank() == 0
    }

    /// `m^V`.
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// `Σ_V`, in basis coordinates.
    pub fn small_cov(&self) -> &DMatrix<f64> {
        &self.small_cov
    }

    /// `Σ^V = v Σ_V vᵀ`; the zero matrix for a Dirac representation.
    pub fn ambient_cov(&self) -> DMatrix<f64> {
        if self.is_dirac() {
            return DMatrix::zeros(self.dim(), self.dim());
        }
        let mut s = &self.basis * &self.small_cov * self.basis.transpose();
        linalg::symmetrize(&mut s);
        s
    }
}

#[derive(Serialize, Deserialize)]
struct RepresentationJson {
    mean: Vec<f64>,
    /// Basis columns, one vector per column.
    basis: Vec<Vec<f64>>,
    small_cov: Vec<Vec<f64>>,
}

impl From<PointRepresentation> for RepresentationJson {
    fn from(r: PointRepresentation) -> Self {
        Self {
            mean: r.mean.iter().copied().collect(),
            basis: r.basis.column_iter().map(|c| c.iter().copied().collect()).collect(),
            small_cov: r.small_cov.row_iter().map(|c| c.iter().copied().collect()).collect(),
        }
    }
}

impl TryFrom<RepresentationJson> for PointRepresentation {
    type Error = Error;

    fn try_from(j: RepresentationJson) -> Result<Self> {
        let n = j.mean.len();
        let k = j.basis.len();
        if let Some(c) = j.basis.iter().find(|c| c.len() != n) {
            return Err(Error::Dimension { expected: n, found: c.len() });
        }
        if j.small_cov.len() != k || j.small_cov.iter().any(|r| r.len() != k) {
            return Err(Error::Dimension { expected: k, found: j.small_cov.len() });
        }
        let basis = DMatrix::from_fn(n, k, |i, c| j.basis[c][i]);
        let small_cov = DMatrix::from_fn(k, k, |a, b| j.small_cov[a][b]);
        PointRepresentation::from_parts(DVector::from_vec(j.mean), basis, small_cov)
    }
}

/// Conditions one model on many points, factoring `Σ` once.
#[derive(Debug, Clone)]
pub struct Conditioner<'a> {
    model: &'a GaussianModel,
    chol: Cholesky<f64, Dyn>,
}

impl<'a> Conditioner<'a> {
    pub fn new(model: &'a GaussianModel) -> Result<Self> {
        let chol = linalg::cholesky(model.covariance(), "model covariance")?;
        Ok(Self { model, chol })
    }

    pub fn condition(&self, point: &MissingSubspacePoint) -> Result<PointRepresentation> {
        let n = self.model.dim();
        if point.dim() != n {
            return Err(Error::Dimension { expected: n, found: point.dim() });
        }
        let x = point.base();
        let v = point.basis();
        if v.ncols() == 0 {
            return Ok(PointRepresentation::dirac(x.clone()));
        }
        // X = Σ⁻¹ v, so vᵀΣ⁻¹v = vᵀX and vᵀΣ⁻¹(m - x) = Xᵀ(m - x).
        let sx = self.chol.solve(v);
        let precision = v.transpose() * &sx;
        let prec_chol = linalg::cholesky(&precision, "projected precision vᵀΣ⁻¹v")?;
        let mut small_cov = prec_chol.inverse();
        linalg::symmetrize(&mut small_cov);
        let shift = sx.transpose() * (self.model.mean() - x);
        let coords = &small_cov * shift;
        let mean = x + v * coords;
        Ok(PointRepresentation { mean, basis: v.clone(), small_cov })
    }

    pub fn condition_all(&self, points: &[MissingSubspacePoint]) -> Result<Vec<PointRepresentation>> {
        points.par_iter().map(|p| self.condition(p)).collect()
    }
}

/// Conditional representation of `point` under `model`.
pub fn condition(model: &GaussianModel, point: &MissingSubspacePoint) -> Result<PointRepresentation> {
    Conditioner::new(model)?.condition(point)
}

/// Free-function form of [`PointRepresentation::ambient_cov`].
pub fn ambient_cov(rep: &PointRepresentation) -> DMatrix<f64> {
    rep.ambient_cov()
}

//! The genRBF kernel and Gram matrix assembly.
//!
//! Each representation `N(m^V, Σ^V)` is smoothed to `N(m^V, Σ^V + σ²I)` and
//! normalized in `L₂`; the kernel is the inner product of two such densities:
//!
//! ```text
//! K(a, b) = Z · exp(-½ (m_a - m_b)ᵀ Σ̂⁻¹ (m_a - m_b)),   Σ̂ = I/(2γ) + Σ_a + Σ_b,
//! Z = det¼(I + 4γΣ_a) · det¼(I + 4γΣ_b) / det½(I + 2γ(Σ_a + Σ_b)),
//! ```
//!
//! with `γ = 1/(4σ²)`. Determinants are taken in the low-rank coordinates of
//! the representations and combined in log space.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::representation::PointRepresentation;

/// Magic bytes of the binary Gram format.
pub const GRAM_MAGIC: &[u8; 4] = b"GRBF";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    gamma: f64,
}

impl KernelParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be positive and finite, got {gamma}")));
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `σ² = 1/(4γ)`.
    pub fn sigma_sq(&self) -> f64 {
        0.25 / self.gamma
    }
}

/// `⟨N(m₁, S₁), N(m₂, S₂)⟩_{L₂} = N(m₁ - m₂, S₁ + S₂)(0)`.
pub fn gaussian_l2_inner(
    m1: &DVector<f64>,
    s1: &DMatrix<f64>,
    m2: &DVector<f64>,
    s2: &DMatrix<f64>,
) -> Result<f64> {
    let n = m1.len();
    if m2.len() != n || s1.shape() != (n, n) || s2.shape() != (n, n) {
        return Err(Error::Dimension { expected: n, found: m2.len() });
    }
    let s = s1 + s2;
    let chol = linalg::cholesky(&s, "sum of covariances")?;
    let d = m1 - m2;
    let quad = d.dot(&chol.solve(&d));
    let log_norm = -0.5 * (n as f64 * (2.0 * PI).ln() + linalg::log_det_chol(&chol));
    Ok((log_norm - 0.5 * quad).exp())
}

/// Convolution with `N(0, σ²I)`: returns `(m^V, Σ^V + σ²I)`.
pub fn embed_regularize(rep: &PointRepresentation, params: &KernelParams) -> (DVector<f64>, DMatrix<f64>) {
    let mut cov = rep.ambient_cov();
    let s2 = params.sigma_sq();
    for i in 0..rep.dim() {
        cov[(i, i)] += s2;
    }
    (rep.mean().clone(), cov)
}

/// Per-representation quantities reused across kernel evaluations.
struct Prepared<'a> {
    rep: &'a PointRepresentation,
    /// `v L` with `Σ_V = L Lᵀ`, so `Σ^V = (vL)(vL)ᵀ`.
    factor: DMatrix<f64>,
    ambient: Option<DMatrix<f64>>,
    /// `log det(I_n + 4γ Σ_V)`.
    log_det_self: f64,
}

impl<'a> Prepared<'a> {
    fn new(rep: &'a PointRepresentation, gamma: f64) -> Result<Self> {
        if rep.is_dirac() {
            return Ok(Self { rep, factor: DMatrix::zeros(rep.dim(), 0), ambient: None, log_det_self: 0.0 });
        }
        let log_det_self = log_det_regularized(rep, 4.0 * gamma)?;
        if !log_det_self.is_finite() {
            return Err(Error::NonFinite { factor: "det(I + 4γΣ^V)" });
        }
        Ok(Self { rep, factor: low_rank_factor(rep)?, ambient: Some(rep.ambient_cov()), log_det_self })
    }
}

/// `v L` with `Σ_V = L Lᵀ`, so that `Σ^V = (vL)(vL)ᵀ`.
fn low_rank_factor(rep: &PointRepresentation) -> Result<DMatrix<f64>> {
    if rep.is_dirac() {
        return Ok(DMatrix::zeros(rep.dim(), 0));
    }
    let l = linalg::cholesky(rep.small_cov(), "conditional covariance")?.unpack();
    Ok(rep.basis() * l)
}

/// `log det(I_N + c Σ^V)`, computed as `log det(I_n + c Σ_V)` in basis coordinates.
pub fn log_det_regularized(rep: &PointRepresentation, c: f64) -> Result<f64> {
    let n = rep.rank();
    if n == 0 {
        return Ok(0.0);
    }
    let m = DMatrix::identity(n, n) + rep.small_cov() * c;
    linalg::log_det_spd(&m, "I + cΣ_V")
}

/// `log det(I_N + c (Σ^V + Σ^W))` through the stacked factor `U = [v_a L_a | v_b L_b]`:
/// `det(I_N + c UUᵀ) = det(I_k + c UᵀU)`.
pub fn log_det_regularized_pair(a: &PointRepresentation, b: &PointRepresentation, c: f64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension { expected: a.dim(), found: b.dim() });
    }
    stacked_log_det(&low_rank_factor(a)?, &low_rank_factor(b)?, c)
}

fn stacked_log_det(fa: &DMatrix<f64>, fb: &DMatrix<f64>, c: f64) -> Result<f64> {
    let (ka, kb) = (fa.ncols(), fb.ncols());
    let k = ka + kb;
    if k == 0 {
        return Ok(0.0);
    }
    let mut u = DMatrix::zeros(fa.nrows(), k);
    u.columns_mut(0, ka).copy_from(fa);
    u.columns_mut(ka, kb).copy_from(fb);
    let mut inner = u.transpose() * &u * c;
    linalg::symmetrize(&mut inner);
    for i in 0..k {
        inner[(i, i)] += 1.0;
    }
    linalg::log_det_spd(&inner, "I + c(Σ^V + Σ^W)")
}

fn pair_value(a: &Prepared<'_>, b: &Prepared<'_>, gamma: f64) -> Result<f64> {
    let n = a.rep.dim();
    if b.rep.dim() != n {
        return Err(Error::Dimension { expected: n, found: b.rep.dim() });
    }
    let d = a.rep.mean() - b.rep.mean();
    let (ka, kb) = (a.factor.ncols(), b.factor.ncols());
    if ka + kb == 0 {
        return Ok((-gamma * d.norm_squared()).exp());
    }

    // Quadratic form in the ambient dimension.
    let mut hat = DMatrix::from_diagonal_element(n, n, 0.5 / gamma);
    if let Some(s) = &a.ambient {
        hat += s;
    }
    if let Some(s) = &b.ambient {
        hat += s;
    }
    let chol = linalg::cholesky(&hat, "Σ̂")?;
    let quad = d.dot(&chol.solve(&d));
    if !quad.is_finite() {
        return Err(Error::NonFinite { factor: "Mahalanobis term" });
    }

    let log_det_joint = stacked_log_det(&a.factor, &b.factor, 2.0 * gamma)?;
    if !log_det_joint.is_finite() {
        return Err(Error::NonFinite { factor: "det(I + 2γ(Σ^V + Σ^W))" });
    }
    let log_z = 0.25 * (a.log_det_self + b.log_det_self) - 0.5 * log_det_joint;
    let value = (log_z - 0.5 * quad).exp();
    if !value.is_finite() {
        return Err(Error::NonFinite { factor: "kernel value" });
    }
    Ok(value)
}

/// genRBF kernel between two representations.
pub fn kernel_value(a: &PointRepresentation, b: &PointRepresentation, params: &KernelParams) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension { expected: a.dim(), found: b.dim() });
    }
    if a == b {
        return Ok(1.0);
    }
    let g = params.gamma();
    pair_value(&Prepared::new(a, g)?, &Prepared::new(b, g)?, g)
}

fn prepare_all<'a>(reps: &'a [PointRepresentation], gamma: f64) -> Result<Vec<Prepared<'a>>> {
    reps.par_iter().map(|r| Prepared::new(r, gamma)).collect()
}

fn check_dims(reps: &[PointRepresentation], n: usize) -> Result<()> {
    match reps.iter().find(|r| r.dim() != n) {
        Some(r) => Err(Error::Dimension { expected: n, found: r.dim() }),
        None => Ok(()),
    }
}

/// Symmetric kernel matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
}

impl GramMatrix {
    /// Wraps a square matrix; validates symmetry to 1e-12.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::Dimension { expected: entries.nrows(), found: entries.ncols() });
        }
        if (&entries - entries.transpose()).amax() > 1e-12 {
            return Err(Error::invalid("gram matrix is not symmetric"));
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Principal submatrix on `idx`.
    pub fn select(&self, idx: &[usize]) -> GramMatrix {
        GramMatrix { entries: self.block(idx, idx) }
    }

    /// Rectangular block `rows × cols`.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.entries[(rows[i], cols[j])])
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.entries.clone().symmetric_eigen().eigenvalues.min()
    }

    /// Row-major CSV without header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for i in 0..self.len() {
            let row: Vec<String> = (0..self.len()).map(|j| self.entries[(i, j)].to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    /// `GRBF`, `u32` size, then the upper triangle (with diagonal) row by row as little-endian `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let m = u32::try_from(self.len()).map_err(|_| Error::invalid("gram matrix too large"))?;
        w.write_all(GRAM_MAGIC)?;
        w.write_all(&m.to_le_bytes())?;
        for i in 0..self.len() {
            for j in i..self.len() {
                w.write_all(&self.entries[(i, j)].to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != GRAM_MAGIC {
            return Err(Error::Parse { row: 0, message: "bad magic, expected GRBF".into() });
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let m = u32::from_le_bytes(len) as usize;
        let mut entries = DMatrix::zeros(m, m);
        let mut buf = [0u8; 8];
        for i in 0..m {
            for j in i..m {
                r.read_exact(&mut buf)?;
                let v = f64::from_le_bytes(buf);
                entries[(i, j)] = v;
                entries[(j, i)] = v;
            }
        }
        Ok(Self { entries })
    }
}

/// Gram matrix over `reps`. Only the upper triangle is evaluated; the
/// diagonal is exactly 1.
pub fn gram(reps: &[PointRepresentation], params: &KernelParams) -> Result<GramMatrix> {
    let m = reps.len();
    if m == 0 {
        return Ok(GramMatrix { entries: DMatrix::zeros(0, 0) });
    }
    check_dims(reps, reps[0].dim())?;
    let g = params.gamma();
    let prepared = prepare_all(reps, g)?;
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..m)
                .map(|j| pair_value(&prepared[i], &prepared[j], g))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut entries = DMatrix::identity(m, m);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    Ok(GramMatrix { entries })
}

/// `rows.len() × cols.len()` matrix of kernel values.
pub fn gram_cross(
    rows: &[PointRepresentation],
    cols: &[PointRepresentation],
    params: &KernelParams,
) -> Result<DMatrix<f64>> {
    let n = rows.first().or(cols.first()).map_or(0, PointRepresentation::dim);
    check_dims(rows, n)?;
    check_dims(cols, n)?;
    let g = params.gamma();
    let pr = prepare_all(rows, g)?;
    let pc = prepare_all(cols, g)?;
    let values: Vec<Vec<f64>> = pr
        .par_iter()
        .map(|a| {
            pc.iter()
                .map(|b| if a.rep == b.rep { Ok(1.0) } else { pair_value(a, b, g) })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| values[i][j]))
}

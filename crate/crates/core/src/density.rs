//! Single-Gaussian density estimation from incomplete data.
//!
//! EM for a multivariate normal under MAR. The E-step replaces the missing
//! block of each row by its conditional mean given the observed block and adds
//! the conditional covariance to the second moments; the M-step takes the
//! completed moments. A ridge `εI` is added to every covariance update, which
//! makes each iteration the MAP step for the penalty `-(nε/2)·tr(Σ⁻¹)`; the
//! penalized observed-data log-likelihood is therefore what EM monitors.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;

/// Gaussian `N(m, Σ)`; `Σ` already includes `ridge · I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianModelJson", into = "GaussianModelJson")]
pub struct GaussianModel {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    ridge: f64,
}

#[derive(Serialize, Deserialize)]
struct GaussianModelJson {
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
    ridge: f64,
}

impl From<GaussianModel> for GaussianModelJson {
    fn from(g: GaussianModel) -> Self {
        let n = g.dim();
        Self {
            mean: g.mean.iter().copied().collect(),
            covariance: (0..n).map(|i| g.covariance.row(i).iter().copied().collect()).collect(),
            ridge: g.ridge,
        }
    }
}

impl TryFrom<GaussianModelJson> for GaussianModel {
    type Error = Error;

    fn try_from(j: GaussianModelJson) -> Result<Self> {
        let n = j.mean.len();
        if j.covariance.len() != n {
            return Err(Error::Dimension { expected: n, found: j.covariance.len() });
        }
        if let Some(r) = j.covariance.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension { expected: n, found: r.len() });
        }
        let cov = DMatrix::from_fn(n, n, |i, k| j.covariance[i][k]);
        GaussianModel::new(DVector::from_vec(j.mean), cov, j.ridge)
    }
}

impl GaussianModel {
    /// Validates symmetry (to 1e-12, relative to the largest entry) and
    /// positive definiteness of `covariance`.
    pub fn new(mean: DVector<f64>, mut covariance: DMatrix<f64>, ridge: f64) -> Result<Self> {
        let n = mean.len();
        if covariance.shape() != (n, n) {
            return Err(Error::Dimension { expected: n, found: covariance.nrows() });
        }
        if !(ridge >= 0.0) {
            return Err(Error::invalid(format!("ridge must be nonnegative, got {ridge}")));
        }
        let scale = covariance.amax().max(1.0);
        if (&covariance - covariance.transpose()).amax() > 1e-12 * scale {
            return Err(Error::invalid("covariance is not symmetric"));
        }
        linalg::symmetrize(&mut covariance);
        linalg::cholesky(&covariance, "covariance")?;
        Ok(Self { mean, covariance, ridge })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Distribution of `A X + b` for `X ~ self`.
    pub fn affine_image(&self, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Self> {
        let mut cov = a * &self.covariance * a.transpose();
        linalg::symmetrize(&mut cov);
        Self::new(a * &self.mean + b, cov, self.ridge)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Ridge choice for [`estimate_em`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ridge {
    /// `1e-6 · trace(Σ₀) / N`, with `Σ₀` the initial diagonal covariance.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct EmConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub ridge: Ridge,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self { max_iters: 1000, tol: 1e-8, ridge: Ridge::Auto }
    }
}

#[derive(Debug, Clone)]
pub struct EmReport {
    pub model: GaussianModel,
    pub iterations: usize,
    pub converged: bool,
    /// Monitored objective after each M-step (penalized when the ridge is positive).
    pub objective: Vec<f64>,
}

/// Gaussian estimate of incomplete data by EM; see [`estimate_em_report`].
pub fn estimate_em(data: &Dataset, max_iters: usize, tol: f64, ridge: Ridge) -> Result<GaussianModel> {
    let cfg = EmConfig { max_iters, tol, ridge };
    estimate_em_report(data, &cfg).map(|r| r.model)
}

pub fn estimate_em_report(data: &Dataset, cfg: &EmConfig) -> Result<EmReport> {
    if data.len() < 2 {
        return Err(Error::invalid("EM needs at least two rows"));
    }
    if cfg.max_iters == 0 || !(cfg.tol > 0.0) {
        return Err(Error::invalid("max_iters and tol must be positive"));
    }
    data.check_all_observed()?;
    let n = data.n_features();
    let rows = data.len() as f64;

    // Initial moments from observed entries.
    let counts = data.observed_counts();
    let mut mean = DVector::<f64>::zeros(n);
    for p in data.points() {
        for (j, v) in p.observed() {
            mean[j] += v;
        }
    }
    for j in 0..n {
        mean[j] /= counts[j] as f64;
    }
    let mut var = DVector::<f64>::zeros(n);
    for p in data.points() {
        for (j, v) in p.observed() {
            var[j] += (v - mean[j]).powi(2);
        }
    }
    for j in 0..n {
        var[j] /= counts[j] as f64;
    }
    let ridge = match cfg.ridge {
        Ridge::Auto => 1e-6 * var.sum() / n as f64,
        Ridge::Fixed(r) if r >= 0.0 => r,
        Ridge::Fixed(r) => return Err(Error::invalid(format!("ridge must be nonnegative, got {r}"))),
    };
    let mut cov = DMatrix::from_diagonal(&var.map(|v| v.max(1e-12) + ridge));

    let objective = |mean: &DVector<f64>, cov: &DMatrix<f64>| -> Result<f64> {
        let ll = observed_log_likelihood(data, mean, cov)?;
        if ridge > 0.0 {
            let inv = linalg::cholesky(cov, "covariance")?.inverse();
            Ok(ll - 0.5 * rows * ridge * inv.trace())
        } else {
            Ok(ll)
        }
    };

    let mut history = vec![objective(&mean, &cov)?];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let (new_mean, new_cov) = em_step(data, &mean, &cov, ridge)?;
        let obj = objective(&new_mean, &new_cov)?;
        let prev = *history.last().unwrap();
        if !obj.is_finite() {
            return Err(Error::NonFinite { factor: "EM log-likelihood" });
        }
        if obj < prev - 10.0 * cfg.tol {
            return Err(Error::LikelihoodDecrease { iteration: iterations, decrease: prev - obj });
        }
        mean = new_mean;
        cov = new_cov;
        history.push(obj);
        if obj - prev < cfg.tol {
            converged = true;
            break;
        }
    }

    Ok(EmReport { model: GaussianModel::new(mean, cov, ridge)?, iterations, converged, objective: history })
}

/// One E-step plus M-step. Rows are processed in order, so the result does
/// not depend on any thread schedule.
fn em_step(
    data: &Dataset,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    ridge: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = mean.len();
    let rows = data.len() as f64;
    let mut completed = Vec::with_capacity(data.len());
    let mut extra = DMatrix::<f64>::zeros(n, n);

    for p in data.points() {
        let obs = p.observed_indices();
        let mis = p.missing();
        let mut x = DVector::from_iterator(n, (0..n).map(|j| p.get(j).unwrap_or(0.0)));
        if mis.is_empty() {
            completed.push(x);
            continue;
        }
        if obs.is_empty() {
            completed.push(mean.clone());
            extra += cov;
            continue;
        }
        let s_oo = cov.select_rows(&obs).select_columns(&obs);
        let s_om = cov.select_rows(&obs).select_columns(mis);
        let s_mm = cov.select_rows(mis).select_columns(mis);
        let chol = linalg::cholesky(&s_oo, "observed covariance block")?;
        // K = Σ_OO⁻¹ Σ_OM, so Σ_MO Σ_OO⁻¹ = Kᵀ.
        let k = chol.solve(&s_om);
        let resid = DVector::from_iterator(obs.len(), obs.iter().map(|&j| x[j] - mean[j]));
        let cond_mean = k.transpose() * resid;
        let cond_cov = s_mm - s_om.transpose() * &k;
        for (a, &ja) in mis.iter().enumerate() {
            x[ja] = mean[ja] + cond_mean[a];
            for (b, &jb) in mis.iter().enumerate() {
                extra[(ja, jb)] += cond_cov[(a, b)];
            }
        }
        completed.push(x);
    }

    let mut new_mean = DVector::zeros(n);
    for x in &completed {
        new_mean += x;
    }
    new_mean /= rows;
    let mut scatter = extra;
    for x in &completed {
        let d = x - &new_mean;
        scatter.ger(1.0, &d, &d, 1.0);
    }
    let mut new_cov = scatter / rows;
    for j in 0..n {
        new_cov[(j, j)] += ridge;
    }
    linalg::symmetrize(&mut new_cov);
    Ok((new_mean, new_cov))
}

/// Sum over rows of the log-density of the observed sub-vector under its
/// marginal `N(m_O, Σ_OO)`. Fully missing rows contribute zero.
pub fn log_likelihood_observed(data: &Dataset, model: &GaussianModel) -> Result<f64> {
    observed_log_likelihood(data, &model.mean, &model.covariance)
}

fn observed_log_likelihood(data: &Dataset, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let n = mean.len();
    if data.n_features() != n {
        return Err(Error::Dimension { expected: n, found: data.n_features() });
    }
    let mut total = 0.0;
    for p in data.points() {
        let obs = p.observed_indices();
        if obs.is_empty() {
            continue;
        }
        let s_oo = cov.select_rows(&obs).select_columns(&obs);
        let chol = linalg::cholesky(&s_oo, "observed covariance block")?;
        let resid = DVector::from_iterator(obs.len(), obs.iter().map(|&j| p.values()[j] - mean[j]));
        let quad = resid.dot(&chol.solve(&resid));
        total += -0.5 * (obs.len() as f64 * (2.0 * PI).ln() + linalg::log_det_chol(&chol) + quad);
    }
    Ok(total)
}

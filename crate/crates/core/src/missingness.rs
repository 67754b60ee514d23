//! Synthetic missingness: MCAR, MAR and NMAR removal processes.
//!
//! MAR and NMAR follow an anchor construction: `N` anchor rows `x₁ … x_N` are
//! drawn, and attribute `i` of every non-anchor row `x` is removed with
//! probability `exp(-t ‖x - xᵢ‖_Σ)` (Mahalanobis norm under the sample
//! covariance). For NMAR the distance uses a hidden half of the features,
//! which is dropped from the output. The rate `t` is calibrated so that the
//! realized fraction of removed cells matches the target.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, IncompletePoint};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

/// Search interval for the rate `t`.
pub const T_RANGE: (f64, f64) = (1e-4, 1e4);
pub const BISECTION_STEPS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Mcar,
    Mar,
    Nmar,
}

impl Mechanism {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mechanism::Mcar => "mcar",
            Mechanism::Mar => "mar",
            Mechanism::Nmar => "nmar",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mcar" => Ok(Mechanism::Mcar),
            "mar" => Ok(Mechanism::Mar),
            "nmar" | "mnar" => Ok(Mechanism::Nmar),
            other => Err(Error::invalid(format!("unknown mechanism {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingnessSpec {
    pub mechanism: Mechanism,
    pub p: f64,
    pub seed: u64,
    /// Number of anchor rows; defaults to the feature count.
    #[serde(default)]
    pub anchor_count: Option<usize>,
}

impl MissingnessSpec {
    pub fn new(mechanism: Mechanism, p: f64, seed: u64) -> Self {
        Self { mechanism, p, seed, anchor_count: None }
    }
}

/// Sidecar record of an injection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskManifest {
    pub mechanism: Mechanism,
    pub p: f64,
    pub t_calibrated: Option<f64>,
    pub seed: u64,
    pub anchor_indices: Vec<usize>,
    pub hidden_features: Vec<usize>,
    pub visible_features: Vec<usize>,
    /// Removed cells over eligible cells (all cells; the visible block for NMAR).
    pub realized_fraction: f64,
    /// Expected fraction at `t_calibrated` from the removal probabilities.
    pub expected_fraction: Option<f64>,
    /// Distance used in the removal probability.
    pub norm: String,
}

#[derive(Debug, Clone)]
pub struct Injection {
    pub data: Dataset,
    pub manifest: MaskManifest,
}

fn check_fraction(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("missing fraction must lie in (0, 1), got {p}")))
    }
}

fn check_complete(data: &Dataset) -> Result<()> {
    if data.is_complete() {
        Ok(())
    } else {
        Err(Error::invalid("missingness injection requires a complete dataset"))
    }
}

fn dense_rows(data: &Dataset) -> Vec<Vec<f64>> {
    data.points().iter().map(|p| p.values().to_vec()).collect()
}

fn with_masks(data: &Dataset, rows: &[Vec<f64>], masks: &[Vec<usize>]) -> Result<Dataset> {
    let points = rows
        .iter()
        .zip(masks)
        .map(|(r, m)| IncompletePoint::new(r.clone(), m.iter().copied()))
        .collect::<Result<Vec<_>>>()?;
    Ok(data.with_points(points))
}

pub fn inject(data: &Dataset, spec: &MissingnessSpec) -> Result<Injection> {
    match spec.mechanism {
        Mechanism::Mcar => inject_mcar_full(data, spec.p, spec.seed),
        Mechanism::Mar => inject_mar_full(data, spec),
        Mechanism::Nmar => inject_nmar_full(data, spec),
    }
}

/// Removes exactly `round(p · M · N)` cells chosen uniformly without replacement.
pub fn inject_mcar(data: &Dataset, p: f64, seed: u64) -> Result<Dataset> {
    inject_mcar_full(data, p, seed).map(|i| i.data)
}

pub fn inject_mar(data: &Dataset, p: f64, seed: u64) -> Result<Dataset> {
    inject_mar_full(data, &MissingnessSpec::new(Mechanism::Mar, p, seed)).map(|i| i.data)
}

pub fn inject_nmar(data: &Dataset, p: f64, seed: u64) -> Result<Dataset> {
    inject_nmar_full(data, &MissingnessSpec::new(Mechanism::Nmar, p, seed)).map(|i| i.data)
}

fn inject_mcar_full(data: &Dataset, p: f64, seed: u64) -> Result<Injection> {
    check_fraction(p)?;
    check_complete(data)?;
    let (m, n) = (data.len(), data.n_features());
    let cells = m * n;
    let count = (p * cells as f64).round() as usize;
    let mut masks = vec![Vec::new(); m];
    let mut rng = rng::stream(seed, "mcar");
    for cell in index::sample(&mut rng, cells, count).into_iter() {
        masks[cell / n].push(cell % n);
    }
    let out = with_masks(data, &dense_rows(data), &masks)?;
    Ok(Injection {
        manifest: MaskManifest {
            mechanism: Mechanism::Mcar,
            p,
            t_calibrated: None,
            seed,
            anchor_indices: vec![],
            hidden_features: vec![],
            visible_features: (0..n).collect(),
            realized_fraction: count as f64 / cells as f64,
            expected_fraction: None,
            norm: String::new(),
        },
        data: out,
    })
}

/// Anchor-based removal process over a set of target features.
///
/// `distances[r][k]` is the Mahalanobis distance between row `r` and the
/// anchor of `features[k]`, measured on the coordinates used for the norm.
#[derive(Debug, Clone)]
pub struct RemovalProcess {
    pub anchors: Vec<usize>,
    pub features: Vec<usize>,
    pub distances: Vec<Vec<f64>>,
    seed: u64,
}

impl RemovalProcess {
    /// Builds the process. `anchor_of[k]` is the anchor row for `features[k]`;
    /// distances use the coordinates `norm_coords` under their ridge-regularized
    /// sample covariance.
    pub fn new(
        rows: &[Vec<f64>],
        features: Vec<usize>,
        anchors: Vec<usize>,
        anchor_of: Vec<usize>,
        norm_coords: &[usize],
        seed: u64,
    ) -> Result<Self> {
        let cov = sample_covariance(rows, norm_coords);
        let chol = linalg::cholesky(&cov, "ridge-regularized sample covariance")?;
        let project = |r: usize| DVector::from_iterator(norm_coords.len(), norm_coords.iter().map(|&c| rows[r][c]));
        let anchor_vecs: Vec<DVector<f64>> = anchor_of.iter().map(|&a| project(a)).collect();
        let distances = (0..rows.len())
            .map(|r| {
                let x = project(r);
                anchor_vecs
                    .iter()
                    .map(|a| {
                        let d = &x - a;
                        d.dot(&chol.solve(&d)).max(0.0).sqrt()
                    })
                    .collect()
            })
            .collect();
        Ok(Self { anchors, features, distances, seed })
    }

    fn is_anchor(&self, r: usize) -> bool {
        self.anchors.contains(&r)
    }

    /// Removal probability of `features[k]` in row `r` at rate `t`.
    pub fn probability(&self, r: usize, k: usize, t: f64) -> f64 {
        if self.is_anchor(r) {
            0.0
        } else {
            (-t * self.distances[r][k]).exp()
        }
    }

    pub fn expected_count(&self, t: f64) -> f64 {
        (0..self.distances.len())
            .map(|r| (0..self.features.len()).map(|k| self.probability(r, k, t)).sum::<f64>())
            .sum()
    }

    fn removed(&self, r: usize, k: usize, t: f64) -> bool {
        !self.is_anchor(r) && rng::cell_uniform(self.seed, r, self.features[k]) < self.probability(r, k, t)
    }

    pub fn realized_count(&self, t: f64) -> usize {
        (0..self.distances.len())
            .map(|r| (0..self.features.len()).filter(|&k| self.removed(r, k, t)).count())
            .sum()
    }

    /// Per-row missing feature indices at rate `t`.
    pub fn masks(&self, t: f64) -> Vec<Vec<usize>> {
        (0..self.distances.len())
            .map(|r| {
                (0..self.features.len())
                    .filter(|&k| self.removed(r, k, t))
                    .map(|k| self.features[k])
                    .collect()
            })
            .collect()
    }

    /// Bisection on `log t` so that the realized removal count is as close as
    /// possible to `target`. The count is non-increasing in `t`.
    pub fn calibrate(&self, target: f64) -> f64 {
        let (mut lo, mut hi) = (T_RANGE.0.ln(), T_RANGE.1.ln());
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if self.realized_count(mid.exp()) as f64 > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (t_lo, t_hi) = (lo.exp(), hi.exp());
        let err = |t: f64| (self.realized_count(t) as f64 - target).abs();
        if err(t_lo) < err(t_hi) {
            t_lo
        } else {
            t_hi
        }
    }
}

/// Unbiased sample covariance on `coords`, plus `1e-6 · trace / d` on the diagonal.
fn sample_covariance(rows: &[Vec<f64>], coords: &[usize]) -> DMatrix<f64> {
    let d = coords.len();
    let m = rows.len() as f64;
    let mut mean = DVector::zeros(d);
    for r in rows {
        for (a, &c) in coords.iter().enumerate() {
            mean[a] += r[c];
        }
    }
    mean /= m;
    let mut cov = DMatrix::zeros(d, d);
    for r in rows {
        let x = DVector::from_iterator(d, coords.iter().map(|&c| r[c])) - &mean;
        cov.ger(1.0, &x, &x, 1.0);
    }
    cov /= (m - 1.0).max(1.0);
    let ridge = 1e-6 * cov.trace() / d as f64;
    let ridge = if ridge > 0.0 { ridge } else { 1e-12 };
    for a in 0..d {
        cov[(a, a)] += ridge;
    }
    cov
}

fn draw_anchors(m: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count == 0 || count >= m {
        return Err(Error::invalid(format!(
            "need 1 <= anchor count < rows, got {count} anchors for {m} rows"
        )));
    }
    let mut rng = rng::stream(seed, "anchors");
    Ok(index::sample(&mut rng, m, count).into_vec())
}

fn inject_mar_full(data: &Dataset, spec: &MissingnessSpec) -> Result<Injection> {
    check_fraction(spec.p)?;
    check_complete(data)?;
    let (m, n) = (data.len(), data.n_features());
    let anchors = draw_anchors(m, spec.anchor_count.unwrap_or(n), spec.seed)?;
    let rows = dense_rows(data);
    let features: Vec<usize> = (0..n).collect();
    let anchor_of = features.iter().map(|&i| anchors[i % anchors.len()]).collect();
    let process = RemovalProcess::new(
        &rows,
        features.clone(),
        anchors.clone(),
        anchor_of,
        &features,
        rng::derive_named(spec.seed, "cells"),
    )?;
    let cells = (m * n) as f64;
    let t = process.calibrate(spec.p * cells);
    let masks = process.masks(t);
    let out = with_masks(data, &rows, &masks)?;
    Ok(Injection {
        manifest: MaskManifest {
            mechanism: Mechanism::Mar,
            p: spec.p,
            t_calibrated: Some(t),
            seed: spec.seed,
            anchor_indices: anchors,
            hidden_features: vec![],
            visible_features: features,
            realized_fraction: out.missing_count() as f64 / cells,
            expected_fraction: Some(process.expected_count(t) / cells),
            norm: "mahalanobis".into(),
        },
        data: out,
    })
}

/// Random split into visible (`⌈N/2⌉`) and hidden features, each sorted.
pub fn split_features(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "split"));
    let mut visible = order[..n.div_ceil(2)].to_vec();
    let mut hidden = order[n.div_ceil(2)..].to_vec();
    visible.sort_unstable();
    hidden.sort_unstable();
    (visible, hidden)
}

fn inject_nmar_full(data: &Dataset, spec: &MissingnessSpec) -> Result<Injection> {
    check_fraction(spec.p)?;
    check_complete(data)?;
    let (m, n) = (data.len(), data.n_features());
    if n < 2 {
        return Err(Error::invalid("NMAR needs at least two features"));
    }
    let (visible, hidden) = split_features(n, spec.seed);
    let anchors = draw_anchors(m, spec.anchor_count.unwrap_or(n), spec.seed)?;
    let rows = dense_rows(data);
    let anchor_of = visible.iter().map(|&i| anchors[i % anchors.len()]).collect();
    let process = RemovalProcess::new(
        &rows,
        visible.clone(),
        anchors.clone(),
        anchor_of,
        &hidden,
        rng::derive_named(spec.seed, "cells"),
    )?;
    let cells = (m * visible.len()) as f64;
    let t = process.calibrate(spec.p * cells);
    let masks = process.masks(t);
    let projected = with_masks(data, &rows, &masks)?.select_features(&visible)?;
    Ok(Injection {
        manifest: MaskManifest {
            mechanism: Mechanism::Nmar,
            p: spec.p,
            t_calibrated: Some(t),
            seed: spec.seed,
            anchor_indices: anchors,
            hidden_features: hidden,
            visible_features: visible,
            realized_fraction: projected.missing_count() as f64 / cells,
            expected_fraction: Some(process.expected_count(t) / cells),
            norm: "mahalanobis".into(),
        },
        data: projected,
    })
}

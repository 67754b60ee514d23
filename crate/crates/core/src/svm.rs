//! Soft-margin SVM on a precomputed Gram matrix, trained by SMO.
//!
//! The dual
//!
//! ```text
//! max  Σ αᵢ - ½ Σᵢⱼ αᵢαⱼ yᵢyⱼ Kᵢⱼ    s.t.  0 ≤ αᵢ ≤ C,  Σ αᵢyᵢ = 0
//! ```
//!
//! is solved by pairwise updates on the maximal KKT-violating pair. Training
//! stops when the violation gap drops below `tol`, which guarantees
//! `|yᵢ f(xᵢ) - 1| ≤ tol` on free vectors and the one-sided conditions on
//! bounded ones.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{self, GramMatrix, KernelParams};
use crate::representation::PointRepresentation;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub c: f64,
    pub tol: f64,
    /// Upper bound on pair updates.
    pub max_passes: usize,
}

impl TrainConfig {
    pub fn new(c: f64) -> Self {
        Self { c, ..Self::default() }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { c: 1.0, tol: 1e-3, max_passes: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// One coefficient per training point.
    pub alphas: Vec<f64>,
    pub labels: Vec<i8>,
    pub bias: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub support_indices: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
    pub training_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelParams>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub support_reps: Vec<PointRepresentation>,
}

impl SvmModel {
    pub fn n_support(&self) -> usize {
        self.support_indices.len()
    }

    /// Attaches the kernel and the representations of the support vectors,
    /// picked from the full training set.
    pub fn with_support_reps(mut self, params: KernelParams, training: &[PointRepresentation]) -> Result<Self> {
        if training.len() != self.alphas.len() {
            return Err(Error::Dimension { expected: self.alphas.len(), found: training.len() });
        }
        self.kernel = Some(params);
        self.support_reps = self.support_indices.iter().map(|&i| training[i].clone()).collect();
        Ok(self)
    }

    /// `Σⱼ αⱼ yⱼ K(·, svⱼ) + b` for each row of `cross` (columns follow support order).
    pub fn decision_values(&self, cross: &DMatrix<f64>) -> Result<Vec<f64>> {
        if cross.ncols() != self.n_support() {
            return Err(Error::Dimension { expected: self.n_support(), found: cross.ncols() });
        }
        let coef: Vec<f64> = self
            .support_indices
            .iter()
            .map(|&i| self.alphas[i] * f64::from(self.labels[i]))
            .collect();
        Ok((0..cross.nrows())
            .map(|r| coef.iter().enumerate().map(|(j, c)| c * cross[(r, j)]).sum::<f64>() + self.bias)
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn sign(v: f64) -> i8 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

/// Class predictions, with `sign(0) = +1`.
pub fn predict(model: &SvmModel, cross: &DMatrix<f64>) -> Result<Vec<i8>> {
    Ok(model.decision_values(cross)?.into_iter().map(sign).collect())
}

/// Predicts from representations using the stored support vectors.
pub fn predict_reps(model: &SvmModel, reps: &[PointRepresentation]) -> Result<Vec<i8>> {
    let params = model
        .kernel
        .ok_or_else(|| Error::invalid("model has no kernel parameters attached"))?;
    if model.support_reps.len() != model.n_support() {
        return Err(Error::invalid("model has no support representations attached"));
    }
    let cross = kernel::gram_cross(reps, &model.support_reps, &params)?;
    predict(model, &cross)
}

pub fn accuracy(predicted: &[i8], truth: &[i8]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

/// `Σ αᵢ - ½ αᵀ Q α` with `Qᵢⱼ = yᵢyⱼKᵢⱼ`.
pub fn dual_objective(gram: &GramMatrix, labels: &[i8], alphas: &[f64]) -> f64 {
    let m = alphas.len();
    let mut quad = 0.0;
    for i in 0..m {
        if alphas[i] == 0.0 {
            continue;
        }
        let yi = f64::from(labels[i]);
        for j in 0..m {
            quad += alphas[i] * alphas[j] * yi * f64::from(labels[j]) * gram.get(i, j);
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

/// Largest KKT violation of `model` on its training Gram matrix.
///
/// Zero when every point satisfies: `y f ≥ 1` at `α = 0`, `y f ≤ 1` at
/// `α = C`, and `y f = 1` in between.
pub fn kkt_violation(model: &SvmModel, gram: &GramMatrix) -> f64 {
    let m = model.alphas.len();
    let all: Vec<usize> = (0..m).collect();
    let cross = gram.block(&all, &model.support_indices);
    let f = model.decision_values(&cross).expect("support columns match");
    let mut worst: f64 = 0.0;
    for i in 0..m {
        let margin = f64::from(model.labels[i]) * f[i];
        let a = model.alphas[i];
        let v = if a <= 0.0 {
            (1.0 - margin).max(0.0)
        } else if a >= model.c {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

pub fn train(gram: &GramMatrix, labels: &[i8], cfg: &TrainConfig) -> Result<SvmModel> {
    let m = gram.len();
    if labels.len() != m {
        return Err(Error::Dimension { expected: m, found: labels.len() });
    }
    if let Some(&l) = labels.iter().find(|&&l| l != 1 && l != -1) {
        return Err(Error::invalid(format!("label {l} is not -1 or +1")));
    }
    if !(cfg.c > 0.0) || !(cfg.tol > 0.0) || cfg.max_passes == 0 {
        return Err(Error::invalid("C, tol and max_passes must be positive"));
    }
    if !labels.contains(&1) || !labels.contains(&-1) {
        return Err(Error::SingleClass);
    }

    let c = cfg.c;
    let k = gram.matrix();
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let mut alpha = vec![0.0; m];
    // Gradient of ½αᵀQα - eᵀα.
    let mut grad = vec![-1.0; m];
    let mut iterations = 0;
    let mut converged = false;

    loop {
        let Some((i, j)) = select_pair(&alpha, &grad, &y, c, cfg.tol) else {
            converged = true;
            break;
        };
        if iterations >= cfg.max_passes {
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let q_ij = y[i] * y[j] * k[(i, j)];
        if y[i] != y[j] {
            let quad = (k[(i, i)] + k[(j, j)] + 2.0 * q_ij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (k[(i, i)] + k[(j, j)] - 2.0 * q_ij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..m {
            grad[t] += y[t] * (y[i] * k[(t, i)] * di + y[j] * k[(t, j)] * dj);
        }
    }

    let bias = compute_bias(&alpha, &grad, &y, c);
    let support_indices: Vec<usize> = (0..m).filter(|&i| alpha[i] > 0.0).collect();
    let mut model = SvmModel {
        alphas: alpha,
        labels: labels.to_vec(),
        bias,
        c,
        support_indices,
        converged,
        iterations,
        training_accuracy: 0.0,
        kernel: None,
        support_reps: Vec::new(),
    };
    let all: Vec<usize> = (0..m).collect();
    let preds = predict(&model, &gram.block(&all, &model.support_indices))?;
    model.training_accuracy = accuracy(&preds, labels);
    Ok(model)
}

fn in_up(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn in_low(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

/// Maximal violating pair, or `None` when the gap is below `tol`.
fn select_pair(alpha: &[f64], grad: &[f64], y: &[f64], c: f64, tol: f64) -> Option<(usize, usize)> {
    let mut up = (f64::NEG_INFINITY, usize::MAX);
    let mut low = (f64::INFINITY, usize::MAX);
    for t in 0..alpha.len() {
        let v = -y[t] * grad[t];
        if in_up(alpha[t], y[t], c) && v > up.0 {
            up = (v, t);
        }
        if in_low(alpha[t], y[t], c) && v < low.0 {
            low = (v, t);
        }
    }
    if up.1 == usize::MAX || low.1 == usize::MAX || up.0 - low.0 < tol {
        None
    } else {
        Some((up.1, low.1))
    }
}

/// Average over free vectors of `-yᵢ∇ᵢ`; midpoint of the feasible interval
/// when there are none.
fn compute_bias(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 { free_sum / free as f64 } else { 0.5 * (ub + lb) };
    -rho
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_pair() {
        let g = GramMatrix::from_matrix(DMatrix::identity(2, 2)).unwrap();
        let model = train(&g, &[1, -1], &TrainConfig::new(10.0)).unwrap();
        assert!(model.converged);
        assert_eq!(model.support_indices, vec![0, 1]);
        assert_eq!(model.training_accuracy, 1.0);
        // Closed form: α = 1 for both, b = 0.
        assert!((model.alphas[0] - 1.0).abs() < 1e-9);
        assert!(model.bias.abs() < 1e-9);
    }

    #[test]
    fn single_class_rejected() {
        let g = GramMatrix::from_matrix(DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(train(&g, &[1, 1], &TrainConfig::default()), Err(Error::SingleClass)));
    }

    #[test]
    fn sign_zero_is_positive() {
        let model = SvmModel {
            alphas: vec![1.0, 1.0],
            labels: vec![1, -1],
            bias: 0.0,
            c: 1.0,
            support_indices: vec![0, 1],
            converged: true,
            iterations: 0,
            training_accuracy: 1.0,
            kernel: None,
            support_reps: vec![],
        };
        let cross = DMatrix::from_row_slice(1, 2, &[0.5, 0.5]);
        assert_eq!(predict(&model, &cross).unwrap(), vec![1]);
        let bad = DMatrix::from_row_slice(1, 3, &[0.5, 0.5, 0.1]);
        assert!(matches!(predict(&model, &bad), Err(Error::Dimension { .. })));
    }

    #[test]
    fn dominated_sum_predicts_support_class() {
        // Two well separated points; a test point identical to the +1 vector.
        let g = GramMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, 1e-9, 1e-9, 1.0])).unwrap();
        let model = train(&g, &[1, -1], &TrainConfig::new(1e3)).unwrap();
        let cross = DMatrix::from_row_slice(1, 2, &[1.0, 1e-9]);
        assert_eq!(predict(&model, &cross).unwrap(), vec![1]);
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let g = GramMatrix::from_matrix(DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 0.5, 0.2, 0.5, 1.0, 0.3, 0.2, 0.3, 1.0],
        ))
        .unwrap();
        let cfg = TrainConfig { c: 100.0, tol: 1e-12, max_passes: 1 };
        let model = train(&g, &[1, -1, 1], &cfg).unwrap();
        assert!(!model.converged);
        assert_eq!(model.iterations, 1);
    }
}

mod common;

use common::*;
use genrbf::kernel::{self, GramMatrix, KernelParams};
use genrbf::svm::{self, SvmModel, TrainConfig};
use genrbf::{Error, PointRepresentation};
use nalgebra::DMatrix;
use rand::Rng;

fn dirac_reps(d: &genrbf::Dataset) -> Vec<PointRepresentation> {
    d.points().iter().map(|p| PointRepresentation::dirac(nalgebra::DVector::from_column_slice(p.values()))).collect()
}

fn random_instance(r: &mut rand_chacha::ChaCha8Rng) -> (GramMatrix, Vec<i8>, f64) {
    let m = r.random_range(10..=60);
    let n = r.random_range(1..=5);
    let model = random_model(r, n);
    let reps: Vec<_> = (0..m)
        .map(|_| {
            let k = r.random_range(0..n);
            let missing: Vec<usize> = (0..k).collect();
            rep_with_missing(r, &model, &missing)
        })
        .collect();
    let gram = kernel::gram(&reps, &KernelParams::new(2f64.powi(r.random_range(-4..=4))).unwrap()).unwrap();
    let mut labels: Vec<i8> = (0..m).map(|_| if r.random::<bool>() { 1 } else { -1 }).collect();
    labels[0] = 1;
    labels[1] = -1;
    (gram, labels, 2f64.powi(r.random_range(-3..=9)))
}

fn assert_feasible(model: &SvmModel) {
    let c = model.c;
    for &a in &model.alphas {
        assert!((-1e-12..=c + 1e-12).contains(&a), "alpha {a} outside [0, {c}]");
    }
    let s: f64 = model.alphas.iter().zip(&model.labels).map(|(a, &y)| a * f64::from(y)).sum();
    assert!(s.abs() <= 1e-8 * c, "sum alpha y = {s}");
}

#[test]
fn kkt_and_feasibility_on_random_instances() {
    let mut r = rng(51);
    for case in 0..20 {
        let (gram, labels, c) = random_instance(&mut r);
        let model = svm::train(&gram, &labels, &TrainConfig::new(c)).unwrap();
        assert!(model.converged, "case {case}");
        assert_feasible(&model);
        let v = svm::kkt_violation(&model, &gram);
        assert!(v <= 1e-3, "case {case}: KKT violation {v}");
    }
}

#[test]
fn dual_optimum_beats_random_feasible_points() {
    let mut r = rng(52);
    for case in 0..5 {
        let (gram, labels, c) = random_instance(&mut r);
        let cfg = TrainConfig { tol: 1e-6, ..TrainConfig::new(c) };
        let model = svm::train(&gram, &labels, &cfg).unwrap();
        let best = svm::dual_objective(&gram, &labels, &model.alphas);
        for _ in 0..200 {
            let mut alpha: Vec<f64> = (0..labels.len()).map(|_| r.random_range(0.0..=c)).collect();
            // Scale the larger class sum down so that Σ αᵢ yᵢ = 0 inside the box.
            let pos: f64 = alpha.iter().zip(&labels).filter(|(_, &y)| y > 0).map(|(a, _)| a).sum();
            let neg: f64 = alpha.iter().zip(&labels).filter(|(_, &y)| y < 0).map(|(a, _)| a).sum();
            for (a, &y) in alpha.iter_mut().zip(&labels) {
                if y > 0 && pos > neg {
                    *a *= neg / pos;
                } else if y < 0 && neg > pos {
                    *a *= pos / neg;
                }
            }
            let obj = svm::dual_objective(&gram, &labels, &alpha);
            assert!(best >= obj - 1e-9, "case {case}: random feasible point {obj} beats {best}");
        }
    }
}

#[test]
fn orthogonal_pair() {
    let gram = GramMatrix::from_matrix(DMatrix::identity(2, 2)).unwrap();
    let model = svm::train(&gram, &[1, -1], &TrainConfig::new(10.0)).unwrap();
    assert_eq!(model.n_support(), 2);
    assert_eq!(model.training_accuracy, 1.0);
    let preds = svm::predict(&model, &gram.block(&[0, 1], &model.support_indices)).unwrap();
    assert_eq!(preds, vec![1, -1]);
}

#[test]
fn single_class_is_rejected() {
    let gram = GramMatrix::from_matrix(DMatrix::identity(3, 3)).unwrap();
    assert!(matches!(svm::train(&gram, &[1, 1, 1], &TrainConfig::new(1.0)), Err(Error::SingleClass)));
}

#[test]
fn separable_blobs() {
    let mut r = rng(53);
    let train = blobs(&mut r, 20, 2, 2.0);
    let test = blobs(&mut r, 100, 2, 2.0);
    let p = KernelParams::new(0.5).unwrap();
    let reps = dirac_reps(&train);
    let gram = kernel::gram(&reps, &p).unwrap();
    let model = svm::train(&gram, train.labels(), &TrainConfig::new(512.0)).unwrap().with_support_reps(p, &reps).unwrap();
    assert_eq!(model.training_accuracy, 1.0);
    let all: Vec<usize> = (0..train.len()).collect();
    let train_preds = svm::predict(&model, &gram.block(&all, &model.support_indices)).unwrap();
    assert_eq!(svm::accuracy(&train_preds, train.labels()), model.training_accuracy);
    let preds = svm::predict_reps(&model, &dirac_reps(&test)).unwrap();
    assert!(svm::accuracy(&preds, test.labels()) >= 0.95);
}

#[test]
fn isolated_support_vector_dominates() {
    // Point 0 (class +1) is far from everything; a copy of it must be classified +1.
    let k = DMatrix::from_row_slice(4, 4, &[
        1.0, 0.0, 0.0, 0.0, //
        0.0, 1.0, 0.9, 0.8, //
        0.0, 0.9, 1.0, 0.9, //
        0.0, 0.8, 0.9, 1.0,
    ]);
    let gram = GramMatrix::from_matrix(k).unwrap();
    let model = svm::train(&gram, &[1, -1, -1, 1], &TrainConfig::new(1e3)).unwrap();
    let cross = gram.block(&[0], &model.support_indices);
    assert_eq!(svm::predict(&model, &cross).unwrap(), vec![1]);
    assert!(svm::predict(&model, &DMatrix::zeros(1, model.n_support() + 1)).is_err());
}

#[test]
fn training_is_deterministic_and_serializable() {
    let mut r = rng(54);
    let (gram, labels, c) = random_instance(&mut r);
    let a = svm::train(&gram, &labels, &TrainConfig::new(c)).unwrap();
    let b = svm::train(&gram, &labels, &TrainConfig::new(c)).unwrap();
    assert_eq!(a, b);
    let text = a.to_json().unwrap();
    assert!(text.contains("\"C\""));
    assert_eq!(SvmModel::from_json(&text).unwrap(), a);
}

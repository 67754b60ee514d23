#![allow(dead_code)]

use genrbf::data::{Dataset, IncompletePoint};
use genrbf::representation::PointRepresentation;
use genrbf::subspace::MissingSubspacePoint;
use genrbf::GaussianModel;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

pub fn normal_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

/// `AAᵀ/n + δI`, well conditioned enough for 1e-9 comparisons.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = normal_mat(rng, n, n);
    let mut s = &a * a.transpose() / n as f64 + DMatrix::identity(n, n) * 0.2;
    s = (&s + s.transpose()) * 0.5;
    s
}

pub fn random_model(rng: &mut ChaCha8Rng, n: usize) -> GaussianModel {
    GaussianModel::new(normal_vec(rng, n), random_spd(rng, n), 0.0).unwrap()
}

pub fn random_missing_point(rng: &mut ChaCha8Rng, n: usize, p: f64) -> IncompletePoint {
    let entries: Vec<Option<f64>> = (0..n)
        .map(|_| {
            let v: f64 = StandardNormal.sample(rng);
            if rng.random::<f64>() < p {
                None
            } else {
                Some(v)
            }
        })
        .collect();
    IncompletePoint::from_options(&entries).unwrap()
}

/// Conditional representation of a random point with the given missing set.
pub fn rep_with_missing(rng: &mut ChaCha8Rng, model: &GaussianModel, missing: &[usize]) -> PointRepresentation {
    let n = model.dim();
    let entries: Vec<Option<f64>> = (0..n)
        .map(|j| if missing.contains(&j) { None } else { Some(StandardNormal.sample(rng)) })
        .collect();
    let p = IncompletePoint::from_options(&entries).unwrap();
    genrbf::representation::condition(model, &MissingSubspacePoint::from_incomplete(&p)).unwrap()
}

/// A representation with a random (non-axis-aligned) subspace of rank `k`.
pub fn random_rep(rng: &mut ChaCha8Rng, n: usize, k: usize) -> PointRepresentation {
    let mean = normal_vec(rng, n);
    if k == 0 {
        return PointRepresentation::dirac(mean);
    }
    let basis = genrbf::linalg::orthonormalize(&normal_mat(rng, n, k)).unwrap();
    PointRepresentation::from_parts(mean, basis, random_spd(rng, k)).unwrap()
}

/// Random incomplete dataset where every feature keeps at least one observed entry
/// and both classes are present.
pub fn random_incomplete_dataset(rng: &mut ChaCha8Rng, m: usize, n: usize, p: f64) -> Dataset {
    let mut points: Vec<IncompletePoint> = (0..m).map(|_| random_missing_point(rng, n, p)).collect();
    // Row 0 complete, so no feature is never observed.
    points[0] = IncompletePoint::complete(normal_vec(rng, n).iter().copied().collect()).unwrap();
    let labels = (0..m).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
    Dataset::new(points, labels).unwrap()
}

/// Two well separated Gaussian blobs.
pub fn blobs(rng: &mut ChaCha8Rng, per_class: usize, n: usize, gap: f64) -> Dataset {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (label, shift) in [(1i8, gap), (-1i8, -gap)] {
        for _ in 0..per_class {
            let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).map(|x: f64| x * 0.5 + shift).collect();
            rows.push(v);
            labels.push(label);
        }
    }
    Dataset::from_rows(&rows, labels).unwrap()
}

mod common;

use common::*;
use genrbf::data::{Dataset, IncompletePoint};
use genrbf::density::{self, EmConfig, Ridge};
use genrbf::missingness;
use genrbf::{Error, GaussianModel};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn sample_gaussian(seed: u64, mean: &[f64], cov: &DMatrix<f64>, m: usize) -> Dataset {
    let mut r = rng(seed);
    let l = cov.clone().cholesky().unwrap().unpack();
    let mu = DVector::from_column_slice(mean);
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| (&mu + &l * normal_vec(&mut r, mean.len())).iter().copied().collect())
        .collect();
    let labels = (0..m).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
    Dataset::from_rows(&rows, labels).unwrap()
}

fn check_recovery(mean: &[f64], cov: &DMatrix<f64>, seed: u64) {
    let full = sample_gaussian(seed, mean, cov, 2000);
    let data = missingness::inject_mcar(&full, 0.3, seed ^ 0xabc).unwrap();
    let model = density::estimate_em(&data, 1000, 1e-8, Ridge::Auto).unwrap();
    for (j, &m) in mean.iter().enumerate() {
        assert!((model.mean()[j] - m).abs() < 0.1, "seed {seed}: mean[{j}] = {}", model.mean()[j]);
    }
    let err = (model.covariance() - cov).amax();
    assert!(err < 0.15, "seed {seed}: covariance error {err}");
}

#[test]
fn em_recovers_two_dimensional_gaussian() {
    let cov = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
    check_recovery(&[1.0, -1.0], &cov, 7);
}

#[test]
fn em_recovers_four_dimensional_gaussian_over_seeds() {
    let cov = DMatrix::from_row_slice(4, 4, &[
        1.5, 0.6, -0.3, 0.2, //
        0.6, 1.0, 0.1, -0.4, //
        -0.3, 0.1, 2.0, 0.5, //
        0.2, -0.4, 0.5, 1.2,
    ]);
    for seed in 0..5 {
        check_recovery(&[1.0, -1.0, 0.5, 2.0], &cov, seed);
    }
}

#[test]
fn complete_data_gives_sample_moments_plus_ridge() {
    let mut r = rng(31);
    let rows: Vec<Vec<f64>> = (0..40).map(|_| normal_vec(&mut r, 3).iter().copied().collect()).collect();
    let data = Dataset::from_rows(&rows, vec![1; 40]).unwrap();
    let ridge = 0.01;
    let report = density::estimate_em_report(&data, &EmConfig { ridge: Ridge::Fixed(ridge), ..EmConfig::default() }).unwrap();
    let m = rows.len() as f64;
    let mean = DVector::from_fn(3, |j, _| rows.iter().map(|x| x[j]).sum::<f64>() / m);
    let cov = DMatrix::from_fn(3, 3, |a, b| {
        rows.iter().map(|x| (x[a] - mean[a]) * (x[b] - mean[b])).sum::<f64>() / m + if a == b { ridge } else { 0.0 }
    });
    assert!((report.model.mean() - &mean).amax() < 1e-12);
    assert!((report.model.covariance() - &cov).amax() < 1e-12);
    assert!(report.converged);
    assert!(report.iterations <= 2);
}

#[test]
fn missing_row_does_not_move_the_mean() {
    let pts = vec![
        IncompletePoint::complete(vec![1.0]).unwrap(),
        IncompletePoint::complete(vec![3.0]).unwrap(),
        IncompletePoint::from_options(&[None]).unwrap(),
    ];
    let data = Dataset::new(pts, vec![1, -1, 1]).unwrap();
    let model = density::estimate_em(&data, 100, 1e-10, Ridge::Fixed(0.0)).unwrap();
    assert!((model.mean()[0] - 2.0).abs() < 1e-12);
}

#[test]
fn never_observed_feature_is_an_error() {
    let pts = vec![
        IncompletePoint::from_options(&[Some(1.0), None]).unwrap(),
        IncompletePoint::from_options(&[Some(2.0), None]).unwrap(),
    ];
    let data = Dataset::new(pts, vec![1, -1]).unwrap();
    assert!(matches!(density::estimate_em(&data, 10, 1e-8, Ridge::Auto), Err(Error::NeverObserved { .. })));
}

fn phi2(x: f64, y: f64, m: &DVector<f64>, s: &DMatrix<f64>) -> f64 {
    let det = s[(0, 0)] * s[(1, 1)] - s[(0, 1)] * s[(1, 0)];
    let (dx, dy) = (x - m[0], y - m[1]);
    let q = (s[(1, 1)] * dx * dx - 2.0 * s[(0, 1)] * dx * dy + s[(0, 0)] * dy * dy) / det;
    (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
}

/// Marginal density of one coordinate by integrating the joint over the other.
fn marginal_by_quadrature(observed: usize, value: f64, m: &DVector<f64>, s: &DMatrix<f64>) -> f64 {
    let other = 1 - observed;
    let sd = s[(other, other)].sqrt();
    let (lo, hi) = (m[other] - 14.0 * sd - 10.0, m[other] + 14.0 * sd + 10.0);
    let steps = 4000;
    let h = (hi - lo) / steps as f64;
    let mut total = 0.0;
    for i in 0..=steps {
        let t = lo + i as f64 * h;
        let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
        let (x, y) = if observed == 0 { (value, t) } else { (t, value) };
        total += w * phi2(x, y, m, s);
    }
    total * h
}

#[test]
fn observed_log_likelihood_matches_quadrature() {
    let m = DVector::from_vec(vec![0.4, -0.7]);
    let s = DMatrix::from_row_slice(2, 2, &[1.3, 0.5, 0.5, 0.8]);
    let model = GaussianModel::new(m.clone(), s.clone(), 0.0).unwrap();
    let pts = vec![
        IncompletePoint::complete(vec![0.1, 0.2]).unwrap(),
        IncompletePoint::from_options(&[Some(1.5), None]).unwrap(),
        IncompletePoint::from_options(&[None, Some(-2.0)]).unwrap(),
        IncompletePoint::from_options(&[None, None]).unwrap(),
    ];
    let data = Dataset::new(pts, vec![1, -1, 1, -1]).unwrap();
    let expected = phi2(0.1, 0.2, &m, &s).ln()
        + marginal_by_quadrature(0, 1.5, &m, &s).ln()
        + marginal_by_quadrature(1, -2.0, &m, &s).ln();
    let got = density::log_likelihood_observed(&data, &model).unwrap();
    assert!((got - expected).abs() < 1e-6, "{got} vs {expected}");
}

#[test]
fn log_likelihood_fixtures() {
    let model = GaussianModel::new(DVector::from_vec(vec![0.0]), DMatrix::identity(1, 1), 0.0).unwrap();
    let at_mean = Dataset::new(vec![IncompletePoint::complete(vec![0.0]).unwrap()], vec![1]).unwrap();
    let ll = density::log_likelihood_observed(&at_mean, &model).unwrap();
    assert!((ll + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
    let empty = Dataset::new(vec![IncompletePoint::from_options(&[None]).unwrap()], vec![1]).unwrap();
    assert_eq!(density::log_likelihood_observed(&empty, &model).unwrap(), 0.0);
}

#[test]
fn model_json_round_trip() {
    let mut r = rng(32);
    let model = random_model(&mut r, 3);
    let text = model.to_json().unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v.get("mean").is_some() && v.get("covariance").is_some() && v.get("ridge").is_some());
    let back = GaussianModel::from_json(&text).unwrap();
    assert_eq!(back, model);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn em_objective_never_decreases(seed in any::<u64>(), m in 8usize..60, n in 1usize..5, p in 0.0f64..0.6) {
        let mut r = rng(seed);
        let data = random_incomplete_dataset(&mut r, m, n, p);
        let report = density::estimate_em_report(&data, &EmConfig { max_iters: 200, ..EmConfig::default() }).unwrap();
        for w in report.objective.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-8 * (1.0 + w[0].abs()), "{} -> {}", w[0], w[1]);
        }
        let cov = report.model.covariance();
        prop_assert!((cov - cov.transpose()).amax() == 0.0);
        prop_assert!(cov.clone().cholesky().is_some());
    }
}

mod common;

use std::collections::BTreeMap;

use common::rng;
use genrbf::stats::{self, Alpha};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF, Normal};

fn table(rows: &[&[f64]]) -> stats::RankTable {
    let k = rows[0].len();
    let methods: Vec<String> = (0..k).map(|j| format!("m{j}")).collect();
    let cells: BTreeMap<String, BTreeMap<String, f64>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| (format!("row{i:03}"), methods.iter().cloned().zip(r.iter().copied()).collect()))
        .collect();
    stats::rank_methods(&methods, &cells).unwrap()
}

#[test]
fn midranks() {
    assert_eq!(stats::midranks_descending(&[0.9, 0.8, 0.7]), vec![1.0, 2.0, 3.0]);
    assert_eq!(stats::midranks_descending(&[0.9, 0.9, 0.7]), vec![1.5, 1.5, 3.0]);
    assert_eq!(stats::midranks_descending(&[0.5, 0.5, 0.5]), vec![2.0, 2.0, 2.0]);
}

#[test]
fn hand_ranked_fixture() {
    let t = table(&[
        &[0.80, 0.70, 0.60], // 1 2 3
        &[0.60, 0.70, 0.80], // 3 2 1
        &[0.75, 0.75, 0.70], // 1.5 1.5 3
        &[0.90, 0.85, 0.95], // 2 3 1
    ]);
    let expected = [7.5 / 4.0, 8.5 / 4.0, 8.0 / 4.0];
    for (a, b) in t.mean_ranks.iter().zip(expected) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn missing_cell_is_reported() {
    let methods = vec!["a".to_string(), "b".to_string()];
    let mut cells = BTreeMap::new();
    cells.insert("cfg".to_string(), BTreeMap::from([("a".to_string(), 0.5)]));
    let err = stats::rank_methods(&methods, &cells).unwrap_err();
    assert!(err.to_string().contains("cfg"), "{err}");
}

#[test]
fn identical_rankings_give_maximal_statistic() {
    let rows: Vec<&[f64]> = vec![&[0.9, 0.8, 0.7]; 10];
    let f = stats::friedman_test(&table(&rows)).unwrap();
    assert_eq!(f.statistic, 20.0);
    assert_eq!(f.degrees_of_freedom, 2);
    assert!((f.p_value - (-10.0f64).exp()).abs() < 1e-15);
}

#[test]
fn two_methods_reduce_to_sign_statistic() {
    // Wins W and losses L of method 0 over n rows: χ² = (W - L)²/n.
    let rows: Vec<&[f64]> = vec![&[0.9, 0.8], &[0.9, 0.8], &[0.9, 0.8], &[0.7, 0.8], &[0.9, 0.1], &[0.2, 0.8], &[0.6, 0.5]];
    let (w, l, n) = (5.0, 2.0, 7.0);
    let f = stats::friedman_test(&table(&rows)).unwrap();
    assert!((f.statistic - (w - l) * (w - l) / n).abs() < 1e-12);
}

#[test]
fn degenerate_tables_are_rejected() {
    assert!(stats::friedman_test(&table(&[&[0.9, 0.8]])).is_err());
    assert!(stats::friedman_test(&table(&[&[0.9], &[0.8]])).is_err());
}

#[test]
fn null_rejection_rate_is_calibrated() {
    let mut r = rng(61);
    let (n, k, trials) = (20, 4, 1000);
    let mut rejections = 0;
    for _ in 0..trials {
        let ranks: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut row: Vec<f64> = (1..=k).map(|x| x as f64).collect();
                row.shuffle(&mut r);
                row
            })
            .collect();
        let t = stats::from_ranks((0..k).map(|j| j.to_string()).collect(), (0..n).map(|i| i.to_string()).collect(), ranks);
        if stats::friedman_test(&t).unwrap().p_value < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / trials as f64;
    assert!((0.03..=0.08).contains(&rate), "rejection rate {rate}");
}

#[test]
fn chi2_survival_matches_statrs() {
    for df in [1.0, 2.0, 3.0, 5.0, 9.0, 20.0, 57.0] {
        let dist = ChiSquared::new(df).unwrap();
        for x in [0.01, 0.5, 1.0, 2.5, 7.0, 15.0, 40.0, 90.0] {
            let ours = stats::chi2_sf(x, df);
            let theirs = dist.sf(x);
            assert!((ours - theirs).abs() < 1e-10, "df {df} x {x}: {ours} vs {theirs}");
        }
    }
    assert_eq!(stats::chi2_sf(0.0, 3.0), 1.0);
}

/// `P(range of k iid standard normals ≤ q) = k ∫ φ(z) [Φ(z+q) - Φ(z)]^{k-1} dz`.
fn range_cdf(q: f64, k: usize) -> f64 {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let (lo, hi, steps) = (-9.0, 9.0, 6000);
    let h = (hi - lo) / steps as f64;
    let mut total = 0.0;
    for i in 0..=steps {
        let z = lo + i as f64 * h;
        let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
        total += w * normal.pdf(z) * (normal.cdf(z + q) - normal.cdf(z)).powi(k as i32 - 1);
    }
    k as f64 * total * h
}

fn range_quantile(p: f64, k: usize) -> f64 {
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if range_cdf(mid, k) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn nemenyi_constants_match_studentized_range() {
    for k in 2..=10 {
        for alpha in [Alpha::P05, Alpha::P10] {
            let expected = range_quantile(1.0 - alpha.value(), k) / 2f64.sqrt();
            let q = stats::nemenyi_q(k, alpha).unwrap();
            // Tabulated to three decimals.
            assert!((q - expected).abs() < 1.5e-3, "k={k} alpha={}: {q} vs {expected}", alpha.value());
        }
    }
    assert!(stats::nemenyi_q(11, Alpha::P05).is_err());
    assert!(stats::nemenyi_q(1, Alpha::P05).is_err());
}

#[test]
fn critical_difference() {
    for n in [1, 4, 25, 100] {
        let cd = stats::nemenyi_cd(2, n, Alpha::P05).unwrap();
        assert!((cd - 1.960 / (n as f64).sqrt()).abs() < 1e-12);
    }
    for k in 2..=10 {
        let by_n: Vec<f64> = [2, 5, 10, 50, 1000, 1_000_000, 100_000_000].iter().map(|&n| stats::nemenyi_cd(k, n, Alpha::P05).unwrap()).collect();
        assert!(by_n.windows(2).all(|w| w[1] < w[0]));
        assert!(*by_n.last().unwrap() < 0.01);
        if k < 10 {
            assert!(stats::nemenyi_cd(k + 1, 10, Alpha::P10).unwrap() > stats::nemenyi_cd(k, 10, Alpha::P10).unwrap());
        }
    }
}

#[test]
fn cd_grouping_fixture() {
    let groups = stats::cd_groups(&[1.2, 1.3, 3.8], 0.5);
    assert_eq!(groups, vec![vec![0, 1], vec![2]]);
}

fn arb_scores() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..7, 2usize..15).prop_flat_map(|(k, n)| {
        // Coarse values so that ties occur.
        prop::collection::vec(prop::collection::vec((0u8..6).prop_map(|v| f64::from(v) / 5.0), k), n)
    })
}

fn table_from(rows: &[Vec<f64>]) -> stats::RankTable {
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    table(&refs)
}

proptest! {
    #[test]
    fn rank_rows_sum_to_triangular_number(rows in arb_scores()) {
        let t = table_from(&rows);
        let k = t.n_methods() as f64;
        for r in &t.ranks {
            prop_assert_eq!(r.iter().sum::<f64>(), k * (k + 1.0) / 2.0);
        }
    }

    #[test]
    fn friedman_invariant_under_monotone_maps(rows in arb_scores()) {
        let mapped: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| x.powi(3) + 2.0 * x - 7.0).collect()).collect();
        let a = stats::friedman_test(&table_from(&rows));
        let b = stats::friedman_test(&table_from(&mapped));
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "one table failed and the other did not"),
        }
    }
}

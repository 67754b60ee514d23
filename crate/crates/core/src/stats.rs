//! Rank aggregation, the Friedman test and the Nemenyi critical difference.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-tailed Nemenyi constants `q_α` for `k = 2..=10` methods
/// (studentized range at infinite degrees of freedom, divided by √2).
const Q_05: [f64; 9] = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];
const Q_10: [f64; 9] = [1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub methods: Vec<String>,
    /// One label per row (configuration).
    pub rows: Vec<String>,
    pub ranks: Vec<Vec<f64>>,
    pub mean_ranks: Vec<f64>,
}

impl RankTable {
    pub fn n_rows(&self) -> usize {
        self.ranks.len()
    }

    pub fn n_methods(&self) -> usize {
        self.methods.len()
    }
}

/// Midranks of `scores`, rank 1 for the largest score.
pub fn midranks_descending(scores: &[f64]) -> Vec<f64> {
    let k = scores.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ranks = vec![0.0; k];
    let mut start = 0;
    while start < k {
        let mut end = start + 1;
        while end < k && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Positions start..end share ranks start+1..=end.
        let mid = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = mid;
        }
        start = end;
    }
    ranks
}

/// Ranks methods within each row of accuracies (higher is better).
///
/// `cells` maps a row label to per-method accuracies; every row must carry a
/// value for every method.
pub fn rank_methods(methods: &[String], cells: &BTreeMap<String, BTreeMap<String, f64>>) -> Result<RankTable> {
    if methods.is_empty() {
        return Err(Error::invalid("no methods to rank"));
    }
    let mut rows = Vec::with_capacity(cells.len());
    let mut ranks = Vec::with_capacity(cells.len());
    for (row, by_method) in cells {
        let scores = methods
            .iter()
            .map(|m| {
                by_method
                    .get(m)
                    .copied()
                    .ok_or_else(|| Error::MissingCell(format!("{row} / {m}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row.clone());
        ranks.push(midranks_descending(&scores));
    }
    Ok(from_ranks(methods.to_vec(), rows, ranks))
}

pub fn from_ranks(methods: Vec<String>, rows: Vec<String>, ranks: Vec<Vec<f64>>) -> RankTable {
    let k = methods.len();
    let n = ranks.len().max(1) as f64;
    let mean_ranks = (0..k).map(|j| ranks.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    RankTable { methods, rows, ranks, mean_ranks }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// `χ²_F = 12n/(k(k+1)) · [Σⱼ R̄ⱼ² - k(k+1)²/4]` with `k - 1` degrees of freedom.
pub fn friedman_test(table: &RankTable) -> Result<FriedmanResult> {
    let n = table.n_rows();
    let k = table.n_methods();
    if n < 2 || k < 2 {
        return Err(Error::invalid(format!("Friedman test needs n >= 2 and k >= 2, got n={n}, k={k}")));
    }
    let (nf, kf) = (n as f64, k as f64);
    let sum_sq: f64 = table.mean_ranks.iter().map(|r| r * r).sum();
    let statistic = 12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0).powi(2) / 4.0);
    let df = k - 1;
    Ok(FriedmanResult { statistic, degrees_of_freedom: df, p_value: chi2_sf(statistic, df as f64) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alpha {
    #[serde(rename = "0.05")]
    P05,
    #[serde(rename = "0.10")]
    P10,
}

impl Alpha {
    pub fn value(&self) -> f64 {
        match self {
            Alpha::P05 => 0.05,
            Alpha::P10 => 0.10,
        }
    }

    pub fn from_value(a: f64) -> Result<Self> {
        if (a - 0.05).abs() < 1e-12 {
            Ok(Alpha::P05)
        } else if (a - 0.10).abs() < 1e-12 {
            Ok(Alpha::P10)
        } else {
            Err(Error::invalid(format!("alpha must be 0.05 or 0.10, got {a}")))
        }
    }
}

pub fn nemenyi_q(k: usize, alpha: Alpha) -> Result<f64> {
    if !(2..=10).contains(&k) {
        return Err(Error::invalid(format!("Nemenyi table covers 2..=10 methods, got {k}")));
    }
    let table = match alpha {
        Alpha::P05 => &Q_05,
        Alpha::P10 => &Q_10,
    };
    Ok(table[k - 2])
}

/// `CD = q_α · √(k(k+1)/(6n))`.
pub fn nemenyi_cd(k: usize, n: usize, alpha: Alpha) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("row count must be positive"));
    }
    let q = nemenyi_q(k, alpha)?;
    Ok(q * ((k * (k + 1)) as f64 / (6.0 * n as f64)).sqrt())
}

/// Maximal sets of methods whose mean ranks lie within `cd` of each other,
/// as in a critical-difference diagram. Methods are returned as indices,
/// each group sorted by mean rank.
pub fn cd_groups(mean_ranks: &[f64], cd: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..mean_ranks.len()).collect();
    order.sort_by(|&a, &b| mean_ranks[a].total_cmp(&mean_ranks[b]).then(a.cmp(&b)));
    let mut spans: Vec<(usize, usize)> = Vec::new();
    for start in 0..order.len() {
        let mut end = start;
        while end + 1 < order.len() && mean_ranks[order[end + 1]] - mean_ranks[order[start]] < cd {
            end += 1;
        }
        // A span starting later can only be subsumed if it ends no later.
        if spans.last().is_none_or(|&(_, e)| end > e) {
            spans.push((start, end));
        }
    }
    spans.into_iter().map(|(s, e)| order[s..=e].to_vec()).collect()
}

/// Plot-ready data for a critical-difference diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdDiagram {
    pub methods: Vec<String>,
    pub mean_ranks: Vec<f64>,
    pub n: usize,
    pub alpha: f64,
    pub cd: f64,
    pub friedman: FriedmanResult,
    pub groups: Vec<CdGroup>,
    pub mode: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdGroup {
    pub methods: Vec<String>,
    pub low: f64,
    pub high: f64,
}

pub fn cd_diagram(table: &RankTable, alpha: Alpha, mode: &str) -> Result<CdDiagram> {
    let friedman = friedman_test(table)?;
    let cd = nemenyi_cd(table.n_methods(), table.n_rows(), alpha)?;
    let groups = cd_groups(&table.mean_ranks, cd)
        .into_iter()
        .map(|g| CdGroup {
            low: table.mean_ranks[g[0]],
            high: table.mean_ranks[*g.last().unwrap()],
            methods: g.iter().map(|&i| table.methods[i].clone()).collect(),
        })
        .collect();
    Ok(CdDiagram {
        methods: table.methods.clone(),
        mean_ranks: table.mean_ranks.clone(),
        n: table.n_rows(),
        alpha: alpha.value(),
        cd,
        friedman,
        groups,
        mode: mode.to_string(),
    })
}

/// Survival function of the χ² distribution, `Q(df/2, x/2)`.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(0.5 * df, 0.5 * x)
}

/// Lanczos approximation (g = 7, n = 9) of `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut a = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_continued_fraction(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..10_000 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Modified Lentz evaluation of the continued fraction for `Q(a, x)`.
fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descending_ranks() {
        assert_eq!(midranks_descending(&[0.9, 0.8, 0.7]), vec![1.0, 2.0, 3.0]);
        assert_eq!(midranks_descending(&[0.9, 0.9, 0.7]), vec![1.5, 1.5, 3.0]);
        assert_eq!(midranks_descending(&[0.5, 0.5, 0.5, 0.5]), vec![2.5; 4]);
    }

    #[test]
    fn missing_cell_is_reported() {
        let methods = vec!["a".to_string(), "b".to_string()];
        let mut cells = BTreeMap::new();
        cells.insert("row1".to_string(), BTreeMap::from([("a".to_string(), 0.5)]));
        match rank_methods(&methods, &cells) {
            Err(Error::MissingCell(c)) => assert!(c.contains("row1") && c.contains('b')),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn friedman_degenerate_tables() {
        let t = from_ranks(vec!["a".into(), "b".into()], vec!["r".into()], vec![vec![1.0, 2.0]]);
        assert!(friedman_test(&t).is_err());
    }

    #[test]
    fn cd_for_two_methods() {
        for n in [1, 4, 25] {
            let cd = nemenyi_cd(2, n, Alpha::P05).unwrap();
            assert!((cd - 1.960 / (n as f64).sqrt()).abs() < 1e-12);
        }
        assert!(nemenyi_cd(11, 5, Alpha::P05).is_err());
        assert!(nemenyi_cd(1, 5, Alpha::P05).is_err());
    }

    #[test]
    fn cd_shrinks_with_rows() {
        let a = nemenyi_cd(4, 10, Alpha::P05).unwrap();
        let b = nemenyi_cd(4, 1_000_000, Alpha::P05).unwrap();
        assert!(b < a && b < 0.01);
    }

    #[test]
    fn grouping_fixture() {
        let groups = cd_groups(&[1.2, 1.3, 3.8], 0.5);
        assert_eq!(groups, vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn grouping_chain() {
        // 1.0 ~ 1.4 ~ 1.8 but 1.0 !~ 1.8.
        let groups = cd_groups(&[1.0, 1.4, 1.8], 0.5);
        assert_eq!(groups, vec![vec![0, 1], vec![1, 2]]);
    }

    #[test]
    fn chi2_closed_form_df2() {
        for x in [0.1, 1.0, 5.0, 20.0, 60.0] {
            assert!((chi2_sf(x, 2.0) - (-x / 2.0).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn ln_gamma_integers() {
        let mut fact = 1.0f64;
        for n in 1..20 {
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-12, "n = {n}");
            fact *= n as f64;
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }
}

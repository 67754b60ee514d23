//! Datasets with explicit missing masks, CSV ingestion and standardization.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound applied to every fitted standard deviation.
pub const SD_FLOOR: f64 = 1e-8;

/// Canonical token written for missing cells.
pub const NA_TOKEN: &str = "NA";

/// A real vector together with the sorted indices of its missing coordinates.
///
/// Entries at missing indices hold a NaN sentinel and are never read.
#[derive(Debug, Clone)]
pub struct IncompletePoint {
    values: Vec<f64>,
    missing: Vec<usize>,
}

impl IncompletePoint {
    /// Builds a point; `missing` may be unsorted and contain duplicates.
    pub fn new(mut values: Vec<f64>, missing: impl IntoIterator<Item = usize>) -> Result<Self> {
        let set: BTreeSet<usize> = missing.into_iter().collect();
        let n = values.len();
        if let Some(&bad) = set.iter().next_back().filter(|&&j| j >= n) {
            return Err(Error::invalid(format!("missing index {bad} out of range for dimension {n}")));
        }
        for &j in &set {
            values[j] = f64::NAN;
        }
        if let Some((j, v)) = values
            .iter()
            .enumerate()
            .find(|(j, v)| !v.is_finite() && !set.contains(j))
        {
            return Err(Error::invalid(format!("observed coordinate {j} is not finite ({v})")));
        }
        Ok(Self { values, missing: set.into_iter().collect() })
    }

    pub fn complete(values: Vec<f64>) -> Result<Self> {
        Self::new(values, std::iter::empty())
    }

    /// Builds a point from optional entries, `None` marking a missing cell.
    pub fn from_options(entries: &[Option<f64>]) -> Result<Self> {
        let values = entries.iter().map(|e| e.unwrap_or(f64::NAN)).collect();
        let missing = entries.iter().enumerate().filter(|(_, e)| e.is_none()).map(|(j, _)| j);
        Self::new(values, missing)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Raw values; entries at missing indices are NaN.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn missing(&self) -> &[usize] {
        &self.missing
    }

    pub fn is_missing(&self, j: usize) -> bool {
        self.missing.binary_search(&j).is_ok()
    }

    pub fn is_complete(&self) -> bool {
        self.missing.is_empty()
    }

    pub fn get(&self, j: usize) -> Option<f64> {
        if self.is_missing(j) {
            None
        } else {
            Some(self.values[j])
        }
    }

    pub fn observed(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(move |(j, _)| !self.is_missing(*j))
            .map(|(j, &v)| (j, v))
    }

    pub fn observed_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| !self.is_missing(j)).collect()
    }

    /// Restricts the point to the given coordinates, in the given order.
    pub fn select(&self, cols: &[usize]) -> IncompletePoint {
        let entries: Vec<Option<f64>> = cols.iter().map(|&c| self.get(c)).collect();
        IncompletePoint::from_options(&entries).expect("selection of a valid point")
    }
}

impl PartialEq for IncompletePoint {
    fn eq(&self, other: &Self) -> bool {
        self.missing == other.missing
            && self.dim() == other.dim()
            && self.observed().zip(other.observed()).all(|(a, b)| a == b)
    }
}

/// Points with binary labels in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<IncompletePoint>,
    labels: Vec<i8>,
    feature_names: Option<Vec<String>>,
    /// Raw label strings for `-1` and `+1`, in that order.
    label_names: Option<[String; 2]>,
}

impl Dataset {
    pub fn new(points: Vec<IncompletePoint>, labels: Vec<i8>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("dataset must contain at least one point"));
        }
        if points.len() != labels.len() {
            return Err(Error::Dimension { expected: points.len(), found: labels.len() });
        }
        let n = points[0].dim();
        if let Some(p) = points.iter().find(|p| p.dim() != n) {
            return Err(Error::Dimension { expected: n, found: p.dim() });
        }
        if let Some(&l) = labels.iter().find(|&&l| l != 1 && l != -1) {
            return Err(Error::invalid(format!("label {l} is not -1 or +1")));
        }
        Ok(Self { points, labels, feature_names: None, label_names: None })
    }

    /// Builds a complete dataset from dense rows.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<i8>) -> Result<Self> {
        let points = rows
            .iter()
            .map(|r| IncompletePoint::complete(r.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(points, labels)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features() {
            return Err(Error::Dimension { expected: self.n_features(), found: names.len() });
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn with_label_names(mut self, negative: String, positive: String) -> Self {
        self.label_names = Some([negative, positive]);
        self
    }

    pub fn points(&self) -> &[IncompletePoint] {
        &self.points
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn label_names(&self) -> Option<&[String; 2]> {
        self.label_names.as_ref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.points[0].dim()
    }

    pub fn feature_name(&self, j: usize) -> String {
        self.feature_names
            .as_ref()
            .map(|n| n[j].clone())
            .unwrap_or_else(|| format!("#{j}"))
    }

    pub fn is_complete(&self) -> bool {
        self.points.iter().all(IncompletePoint::is_complete)
    }

    pub fn missing_count(&self) -> usize {
        self.points.iter().map(|p| p.missing().len()).sum()
    }

    pub fn missing_fraction(&self) -> f64 {
        self.missing_count() as f64 / (self.len() * self.n_features()) as f64
    }

    /// Rows at the given indices, in that order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            points: rows.iter().map(|&i| self.points[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            label_names: self.label_names.clone(),
        }
    }

    /// Columns at the given indices, in that order.
    pub fn select_features(&self, cols: &[usize]) -> Result<Dataset> {
        if let Some(&c) = cols.iter().find(|&&c| c >= self.n_features()) {
            return Err(Error::Dimension { expected: self.n_features(), found: c + 1 });
        }
        Ok(Dataset {
            points: self.points.iter().map(|p| p.select(cols)).collect(),
            labels: self.labels.clone(),
            feature_names: self
                .feature_names
                .as_ref()
                .map(|n| cols.iter().map(|&c| n[c].clone()).collect()),
            label_names: self.label_names.clone(),
        })
    }

    pub(crate) fn with_points(&self, points: Vec<IncompletePoint>) -> Dataset {
        debug_assert_eq!(points.len(), self.points.len());
        Dataset {
            points,
            labels: self.labels.clone(),
            feature_names: self.feature_names.clone(),
            label_names: self.label_names.clone(),
        }
    }

    /// Count of observed entries for every feature.
    pub fn observed_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_features()];
        for p in &self.points {
            for (j, _) in p.observed() {
                counts[j] += 1;
            }
        }
        counts
    }

    pub(crate) fn check_all_observed(&self) -> Result<()> {
        match self.observed_counts().iter().position(|&c| c == 0) {
            Some(j) => Err(Error::NeverObserved { feature: self.feature_name(j) }),
            None => Ok(()),
        }
    }
}

/// Which column carries the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Last,
    Index(usize),
    Name(String),
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "last" => LabelColumn::Last,
            _ => match s.parse::<usize>() {
                Ok(i) => LabelColumn::Index(i),
                Err(_) => LabelColumn::Name(s.to_string()),
            },
        })
    }
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub missing_tokens: Vec<String>,
    pub label_column: LabelColumn,
    /// `None` detects a header: the first row is a header when any of its
    /// feature cells is neither numeric nor a missing token.
    pub has_header: Option<bool>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            missing_tokens: vec!["NA".into(), "?".into(), "".into()],
            label_column: LabelColumn::Last,
            has_header: None,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, opts)
}

pub fn read_csv<R: Read>(reader: R, opts: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse { row: i + 1, message: e.to_string() })?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(Error::Parse { row: 0, message: "empty file".into() });
    }
    let width = rows[0].len();
    if width < 2 {
        return Err(Error::Parse { row: 1, message: "need at least one feature and a label".into() });
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
        return Err(Error::Parse {
            row: i + 1,
            message: format!("expected {width} columns, found {}", r.len()),
        });
    }

    let is_missing = |s: &str| opts.missing_tokens.iter().any(|t| t == s);
    let first_row_header = |label_idx: Option<usize>| {
        rows[0]
            .iter()
            .enumerate()
            .filter(|(j, _)| Some(*j) != label_idx)
            .any(|(_, c)| !is_missing(c) && c.parse::<f64>().is_err())
    };

    let (has_header, label_idx) = match &opts.label_column {
        LabelColumn::Name(name) => {
            if opts.has_header == Some(false) {
                return Err(Error::invalid("label column given by name but file has no header"));
            }
            let idx = rows[0].iter().position(|c| c == name).ok_or_else(|| Error::Parse {
                row: 1,
                message: format!("label column {name:?} not found in header"),
            })?;
            (true, idx)
        }
        LabelColumn::Index(i) => {
            if *i >= width {
                return Err(Error::invalid(format!("label column {i} out of range ({width} columns)")));
            }
            (opts.has_header.unwrap_or_else(|| first_row_header(Some(*i))), *i)
        }
        LabelColumn::Last => {
            let i = width - 1;
            (opts.has_header.unwrap_or_else(|| first_row_header(Some(i))), i)
        }
    };

    let feature_cols: Vec<usize> = (0..width).filter(|&j| j != label_idx).collect();
    let feature_names = has_header.then(|| feature_cols.iter().map(|&j| rows[0][j].clone()).collect());
    let body_start = usize::from(has_header);
    if rows.len() <= body_start {
        return Err(Error::Parse { row: 1, message: "no data rows".into() });
    }

    let raw_labels: BTreeSet<&str> = rows[body_start..].iter().map(|r| r[label_idx].as_str()).collect();
    if raw_labels.len() != 2 {
        return Err(Error::Parse {
            row: body_start + 1,
            message: format!("label column must take exactly two values, found {}", raw_labels.len()),
        });
    }
    let mut pair: Vec<&str> = raw_labels.into_iter().collect();
    sort_label_values(&mut pair);
    let (neg, pos) = (pair[0].to_string(), pair[1].to_string());

    let mut points = Vec::with_capacity(rows.len() - body_start);
    let mut labels = Vec::with_capacity(rows.len() - body_start);
    for (i, row) in rows.iter().enumerate().skip(body_start) {
        let mut entries = Vec::with_capacity(feature_cols.len());
        for &j in &feature_cols {
            let cell = row[j].as_str();
            if is_missing(cell) {
                entries.push(None);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: i + 1,
                message: format!("non-numeric cell {cell:?} in column {}", j + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { row: i + 1, message: format!("non-finite cell {cell:?}") });
            }
            entries.push(Some(v));
        }
        points.push(IncompletePoint::from_options(&entries)?);
        labels.push(if row[label_idx] == pos { 1 } else { -1 });
    }

    let mut ds = Dataset::new(points, labels)?.with_label_names(neg, pos);
    if let Some(names) = feature_names {
        ds = ds.with_feature_names(names)?;
    }
    Ok(ds)
}

/// Sorts two raw label values numerically when both parse, else lexically.
fn sort_label_values(pair: &mut [&str]) {
    let numeric: Option<Vec<f64>> = pair.iter().map(|s| s.parse::<f64>().ok()).collect();
    match numeric {
        Some(_) => pair.sort_by(|a, b| {
            let (x, y) = (a.parse::<f64>().unwrap(), b.parse::<f64>().unwrap());
            x.total_cmp(&y)
        }),
        None => pair.sort(),
    }
}

/// Writes the dataset as CSV with `NA` for missing cells and the label last.
pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let n = data.n_features();
    if let Some(names) = data.feature_names() {
        let mut header: Vec<&str> = names.iter().map(String::as_str).collect();
        header.push("label");
        w.write_record(&header).map_err(csv_err)?;
    }
    let (neg, pos) = match data.label_names() {
        Some([a, b]) => (a.clone(), b.clone()),
        None => ("-1".to_string(), "1".to_string()),
    };
    for (p, &l) in data.points().iter().zip(data.labels()) {
        let mut rec: Vec<String> = (0..n)
            .map(|j| p.get(j).map_or_else(|| NA_TOKEN.to_string(), |v| v.to_string()))
            .collect();
        rec.push(if l > 0 { pos.clone() } else { neg.clone() });
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(data, std::io::BufWriter::new(file))
}

/// Per-feature location and scale fitted on observed entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

/// Observed-entry mean and (population) standard deviation per feature.
pub fn fit_standardization(data: &Dataset) -> Result<StandardizationParams> {
    data.check_all_observed()?;
    let n = data.n_features();
    let counts = data.observed_counts();
    let mut mean = vec![0.0; n];
    for p in data.points() {
        for (j, v) in p.observed() {
            mean[j] += v;
        }
    }
    for (m, &c) in mean.iter_mut().zip(&counts) {
        *m /= c as f64;
    }
    let mut var = vec![0.0; n];
    for p in data.points() {
        for (j, v) in p.observed() {
            var[j] += (v - mean[j]).powi(2);
        }
    }
    let sd = var
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| (s / c as f64).sqrt().max(SD_FLOOR))
        .collect();
    Ok(StandardizationParams { mean, sd })
}

pub fn apply_standardization(data: &Dataset, params: &StandardizationParams) -> Result<Dataset> {
    map_observed(data, params, |v, m, s| (v - m) / s)
}

/// Inverse of [`apply_standardization`].
pub fn invert_standardization(data: &Dataset, params: &StandardizationParams) -> Result<Dataset> {
    map_observed(data, params, |v, m, s| v * s + m)
}

fn map_observed(
    data: &Dataset,
    params: &StandardizationParams,
    f: impl Fn(f64, f64, f64) -> f64,
) -> Result<Dataset> {
    let n = data.n_features();
    if params.mean.len() != n || params.sd.len() != n {
        return Err(Error::Dimension { expected: n, found: params.mean.len().min(params.sd.len()) });
    }
    let points = data
        .points()
        .iter()
        .map(|p| {
            let values = p
                .values()
                .iter()
                .enumerate()
                .map(|(j, &v)| if p.is_missing(j) { v } else { f(v, params.mean[j], params.sd[j]) })
                .collect();
            IncompletePoint::new(values, p.missing().iter().copied())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(data.with_points(points))
}

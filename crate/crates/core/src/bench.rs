//! Experimental protocol: double cross-validation with grid search, simple
//! imputation baselines, and repetition over missingness samples.
//!
//! Every fitted quantity (standardization, Gaussian model, imputation means,
//! hyperparameters) is computed from the training side of each split only.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{self, Dataset, IncompletePoint, StandardizationParams};
use crate::density::{self, EmConfig, GaussianModel};
use crate::error::{Error, Result};
use crate::kernel::{self, GramMatrix, KernelParams};
use crate::missingness::{self, Mechanism, MissingnessSpec};
use crate::representation::{Conditioner, PointRepresentation};
use crate::rng;
use crate::stats::{self, RankTable};
use crate::subspace::MissingSubspacePoint;
use crate::svm::{self, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[serde(rename = "genrbf")]
    GenRbf,
    Zero,
    Mean,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::GenRbf => "genrbf",
            Method::Zero => "zero",
            Method::Mean => "mean",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "genrbf" => Ok(Method::GenRbf),
            "zero" => Ok(Method::Zero),
            "mean" => Ok(Method::Mean),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }
}

fn powers_of_two(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).step_by(2).map(|k| 2f64.powi(k)).collect()
}

/// `C ∈ {2⁻⁵, 2⁻³, …, 2⁹}`.
pub fn default_c_grid() -> Vec<f64> {
    powers_of_two(-5, 9)
}

/// `γ ∈ {2⁻⁵, 2⁻³, …, 2¹⁵}`.
pub fn default_gamma_grid() -> Vec<f64> {
    powers_of_two(-5, 15)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub c_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub repetitions: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub svm_tol: f64,
    pub svm_max_passes: usize,
    pub em_max_iters: usize,
    pub em_tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            c_grid: default_c_grid(),
            gamma_grid: default_gamma_grid(),
            outer_folds: 5,
            inner_folds: 5,
            repetitions: 10,
            methods: vec![Method::GenRbf, Method::Zero, Method::Mean],
            seed: 0,
            svm_tol: 1e-3,
            svm_max_passes: 100_000,
            em_max_iters: 1000,
            em_tol: 1e-8,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |g: &[f64]| !g.is_empty() && g.iter().all(|&v| v > 0.0 && v.is_finite());
        if !positive(&self.c_grid) {
            return Err(Error::invalid("c_grid must be a nonempty list of positive numbers"));
        }
        if !positive(&self.gamma_grid) {
            return Err(Error::invalid("gamma_grid must be a nonempty list of positive numbers"));
        }
        if self.outer_folds < 2 || self.inner_folds < 2 {
            return Err(Error::invalid("outer_folds and inner_folds must be at least 2"));
        }
        if self.repetitions < 1 {
            return Err(Error::invalid("repetitions must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("methods must not be empty"));
        }
        if !(self.svm_tol > 0.0) || self.svm_max_passes == 0 || self.em_max_iters == 0 || !(self.em_tol > 0.0) {
            return Err(Error::invalid("solver tolerances and iteration limits must be positive"));
        }
        Ok(())
    }

    fn sorted_grid(g: &[f64]) -> Vec<f64> {
        let mut g = g.to_vec();
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    }

    fn train_config(&self, c: f64) -> TrainConfig {
        TrainConfig { c, tol: self.svm_tol, max_passes: self.svm_max_passes }
    }

    fn em_config(&self) -> EmConfig {
        EmConfig { max_iters: self.em_max_iters, tol: self.em_tol, ..EmConfig::default() }
    }
}

/// Fold index per row; class proportions are preserved across folds.
pub fn stratified_folds(labels: &[i8], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng::stream(seed, "stratified-folds");
    let mut folds = vec![0; labels.len()];
    let mut offset = 0;
    for class in [-1i8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for (pos, &i) in idx.iter().enumerate() {
            folds[i] = (offset + pos) % k;
        }
        // Continue the round robin so fold sizes stay balanced overall.
        offset += idx.len();
    }
    folds
}

fn split(folds: &[usize], fold: usize) -> (Vec<usize>, Vec<usize>) {
    let train = (0..folds.len()).filter(|&i| folds[i] != fold).collect();
    let test = (0..folds.len()).filter(|&i| folds[i] == fold).collect();
    (train, test)
}

fn require_both_classes(labels: &[i8], split: &str) -> Result<()> {
    for class in [-1i8, 1] {
        if !labels.contains(&class) {
            return Err(Error::MissingClass { label: class, split: split.to_string() });
        }
    }
    Ok(())
}

/// Replaces every missing entry by 0.
pub fn impute_zero(data: &Dataset) -> Dataset {
    let points = data
        .points()
        .iter()
        .map(|p| {
            let values = (0..p.dim()).map(|j| p.get(j).unwrap_or(0.0)).collect();
            IncompletePoint::complete(values).expect("finite observed values")
        })
        .collect();
    data.with_points(points)
}

/// Replaces every missing entry by the given per-feature mean.
pub fn impute_mean(data: &Dataset, means: &[f64]) -> Result<Dataset> {
    if means.len() != data.n_features() {
        return Err(Error::Dimension { expected: data.n_features(), found: means.len() });
    }
    let points = data
        .points()
        .iter()
        .map(|p| {
            let values = (0..p.dim()).map(|j| p.get(j).unwrap_or(means[j])).collect();
            IncompletePoint::complete(values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(data.with_points(points))
}

/// Everything fitted on a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPreprocessor {
    pub method: Method,
    pub standardization: StandardizationParams,
    pub gaussian: Option<GaussianModel>,
    pub impute_means: Option<Vec<f64>>,
}

impl FoldPreprocessor {
    pub fn fit(train: &Dataset, method: Method, em: &EmConfig) -> Result<Self> {
        let standardization = data::fit_standardization(train)?;
        let std_train = data::apply_standardization(train, &standardization)?;
        let (gaussian, impute_means) = match method {
            Method::GenRbf => {
                let g = density::estimate_em_report(&std_train, em)?.model;
                (Some(g), None)
            }
            Method::Mean => (None, Some(data::fit_standardization(&std_train)?.mean)),
            Method::Zero => (None, None),
        };
        Ok(Self { method, standardization, gaussian, impute_means })
    }

    /// Kernel-ready representations of `data`.
    pub fn represent(&self, data: &Dataset) -> Result<Vec<PointRepresentation>> {
        let std = data::apply_standardization(data, &self.standardization)?;
        let dirac = |d: &Dataset| {
            d.points()
                .iter()
                .map(|p| PointRepresentation::dirac(DVector::from_column_slice(p.values())))
                .collect()
        };
        match self.method {
            Method::GenRbf => {
                let g = self.gaussian.as_ref().expect("fitted gaussian");
                let subspaces: Vec<MissingSubspacePoint> =
                    std.points().iter().map(MissingSubspacePoint::from_incomplete).collect();
                Conditioner::new(g)?.condition_all(&subspaces)
            }
            Method::Zero => Ok(dirac(&impute_zero(&std))),
            Method::Mean => Ok(dirac(&impute_mean(&std, self.impute_means.as_ref().expect("fitted means"))?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldDetail {
    pub fold: usize,
    #[serde(rename = "C")]
    pub c: f64,
    pub gamma: f64,
    pub inner_accuracy: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub mean_accuracy: f64,
    pub folds: Vec<FoldDetail>,
}

/// Mean inner-CV accuracy for every `(C, γ)`, grid-ordered by `γ` then `C`.
fn inner_search(
    grams: &[(f64, GramMatrix)],
    labels: &[i8],
    config: &ExperimentConfig,
    seed: u64,
) -> Result<Vec<(f64, f64, f64)>> {
    let folds = stratified_folds(labels, config.inner_folds, seed);
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..config.inner_folds).map(|f| split(&folds, f)).collect();
    for (f, (tr, _)) in splits.iter().enumerate() {
        let l: Vec<i8> = tr.iter().map(|&i| labels[i]).collect();
        require_both_classes(&l, &format!("inner training fold {f}"))?;
    }
    let c_grid = ExperimentConfig::sorted_grid(&config.c_grid);
    let cells: Vec<(usize, f64)> = (0..grams.len())
        .flat_map(|g| c_grid.iter().map(move |&c| (g, c)))
        .collect();
    cells
        .par_iter()
        .map(|&(g, c)| {
            let (gamma, gram) = &grams[g];
            let mut total = 0.0;
            for (tr, va) in &splits {
                let l: Vec<i8> = tr.iter().map(|&i| labels[i]).collect();
                let model = svm::train(&gram.select(tr), &l, &config.train_config(c))?;
                let support: Vec<usize> = model.support_indices.iter().map(|&s| tr[s]).collect();
                let preds = svm::predict(&model, &gram.block(va, &support))?;
                let truth: Vec<i8> = va.iter().map(|&i| labels[i]).collect();
                total += svm::accuracy(&preds, &truth);
            }
            Ok((c, *gamma, total / splits.len() as f64))
        })
        .collect()
}

/// Argmax of inner accuracy; ties go to the smallest `C`, then the smallest `γ`.
fn select_best(scores: &[(f64, f64, f64)]) -> (f64, f64, f64) {
    let mut best = scores[0];
    for &s in &scores[1..] {
        let better = s.2 > best.2 || (s.2 == best.2 && (s.0 < best.0 || (s.0 == best.0 && s.1 < best.1)));
        if better {
            best = s;
        }
    }
    best
}

/// Double cross-validation of one method on one dataset.
pub fn run_cv(data: &Dataset, method: Method, config: &ExperimentConfig) -> Result<CvOutcome> {
    config.validate()?;
    let fold_seed = rng::derive_named(config.seed, "outer-folds");
    let folds = stratified_folds(data.labels(), config.outer_folds, fold_seed);
    let gamma_grid = ExperimentConfig::sorted_grid(&config.gamma_grid);
    let em = config.em_config();

    let mut details = Vec::with_capacity(config.outer_folds);
    for fold in 0..config.outer_folds {
        let (train_idx, test_idx) = split(&folds, fold);
        if test_idx.is_empty() {
            return Err(Error::invalid(format!("outer fold {fold} is empty")));
        }
        let train = data.subset(&train_idx);
        let test = data.subset(&test_idx);
        require_both_classes(train.labels(), &format!("outer training fold {fold}"))?;

        let prep = FoldPreprocessor::fit(&train, method, &em)?;
        let train_reps = prep.represent(&train)?;
        let test_reps = prep.represent(&test)?;

        let grams = gamma_grid
            .iter()
            .map(|&g| Ok((g, kernel::gram(&train_reps, &KernelParams::new(g)?)?)))
            .collect::<Result<Vec<_>>>()?;
        let scores = inner_search(&grams, train.labels(), config, rng::derive(fold_seed, &[fold as u64]))?;
        let (c, gamma, inner_accuracy) = select_best(&scores);

        let gram = &grams.iter().find(|(g, _)| *g == gamma).expect("gamma in grid").1;
        let params = KernelParams::new(gamma)?;
        let model = svm::train(gram, train.labels(), &config.train_config(c))?;
        let support: Vec<PointRepresentation> =
            model.support_indices.iter().map(|&i| train_reps[i].clone()).collect();
        let cross = kernel::gram_cross(&test_reps, &support, &params)?;
        let preds = svm::predict(&model, &cross)?;
        details.push(FoldDetail { fold, c, gamma, inner_accuracy, accuracy: svm::accuracy(&preds, test.labels()) });
    }
    let mean_accuracy = details.iter().map(|d| d.accuracy).sum::<f64>() / details.len() as f64;
    Ok(CvOutcome { mean_accuracy, folds: details })
}

/// A named complete dataset to benchmark on.
#[derive(Debug, Clone)]
pub struct NamedDataset {
    pub name: String,
    pub data: Dataset,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub dataset: String,
    pub mechanism: Mechanism,
    /// Missing fraction, as a string with fixed formatting so keys are exact.
    pub p: String,
    pub method: Method,
}

impl CellKey {
    fn new(dataset: &str, mechanism: Mechanism, p: f64, method: Method) -> Self {
        Self { dataset: dataset.to_string(), mechanism, p: format_p(p), method }
    }

    pub fn p_value(&self) -> f64 {
        self.p.parse().expect("formatted fraction")
    }
}

fn format_p(p: f64) -> String {
    format!("{p:.4}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRecord {
    pub repetition: usize,
    pub mean_accuracy: f64,
    pub folds: Vec<FoldDetail>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    #[serde(flatten)]
    pub key: CellKey,
    pub mean_accuracy: f64,
    pub sd: f64,
    pub repetitions: Vec<RepetitionRecord>,
    #[serde(skip)]
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    #[serde(flatten)]
    pub key: CellKey,
    pub repetition: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkMetadata {
    pub stratified_folds: bool,
    pub tie_break: String,
    pub seed: u64,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub metadata: BenchmarkMetadata,
    pub cells: Vec<CellSummary>,
    pub errors: Vec<CellError>,
    #[serde(skip)]
    pub elapsed_secs: f64,
}

impl BenchmarkResult {
    pub fn cell(&self, dataset: &str, mechanism: Mechanism, p: f64, method: Method) -> Option<&CellSummary> {
        let key = CellKey::new(dataset, mechanism, p, method);
        self.cells.iter().find(|c| c.key == key)
    }

    pub fn is_complete(&self) -> bool {
        self.errors.is_empty()
    }
}

fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Seed for the missingness sample of one repetition.
pub fn injection_seed(root: u64, dataset: &str, mechanism: Mechanism, p: f64, repetition: usize) -> u64 {
    rng::derive_named(root, &format!("inject/{dataset}/{mechanism}/{}/{repetition}", format_p(p)))
}

/// Seed for fold assignment of one repetition; shared by all methods.
pub fn folds_seed(root: u64, dataset: &str, mechanism: Mechanism, p: f64, repetition: usize) -> u64 {
    rng::derive_named(root, &format!("folds/{dataset}/{mechanism}/{}/{repetition}", format_p(p)))
}

/// Runs every (dataset, mechanism, fraction, repetition, method) cell.
///
/// A fraction of 0 skips injection. Failing cells are recorded in
/// `errors` rather than aborting the run.
pub fn run_benchmark(
    datasets: &[NamedDataset],
    mechanisms: &[Mechanism],
    fractions: &[f64],
    config: &ExperimentConfig,
) -> Result<BenchmarkResult> {
    config.validate()?;
    if let Some(p) = fractions.iter().find(|&&p| !(0.0..1.0).contains(&p)) {
        return Err(Error::invalid(format!("fraction {p} outside [0, 1)")));
    }
    let start = Instant::now();

    struct Task<'a> {
        ds: &'a NamedDataset,
        mechanism: Mechanism,
        p: f64,
        repetition: usize,
    }
    let mut tasks = Vec::new();
    for ds in datasets {
        for &mechanism in mechanisms {
            for &p in fractions {
                for repetition in 0..config.repetitions {
                    tasks.push(Task { ds, mechanism, p, repetition });
                }
            }
        }
    }

    type Outcome = (CellKey, usize, std::result::Result<(CvOutcome, f64), String>);
    let outcomes: Vec<Outcome> = tasks
        .par_iter()
        .flat_map_iter(|t| {
            let injected = if t.p == 0.0 {
                Ok(t.ds.data.clone())
            } else {
                let spec = MissingnessSpec::new(
                    t.mechanism,
                    t.p,
                    injection_seed(config.seed, &t.ds.name, t.mechanism, t.p, t.repetition),
                );
                missingness::inject(&t.ds.data, &spec).map(|i| i.data)
            };
            let cv_config = ExperimentConfig {
                seed: folds_seed(config.seed, &t.ds.name, t.mechanism, t.p, t.repetition),
                ..config.clone()
            };
            config
                .methods
                .iter()
                .map(|&method| {
                    let key = CellKey::new(&t.ds.name, t.mechanism, t.p, method);
                    let clock = Instant::now();
                    let res = match &injected {
                        Ok(d) => run_cv(d, method, &cv_config)
                            .map(|o| (o, clock.elapsed().as_secs_f64()))
                            .map_err(|e| e.to_string()),
                        Err(e) => Err(format!("injection failed: {e}")),
                    };
                    (key, t.repetition, res)
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let mut grouped: BTreeMap<CellKey, Vec<(usize, CvOutcome, f64)>> = BTreeMap::new();
    let mut errors = Vec::new();
    for (key, repetition, res) in outcomes {
        match res {
            Ok((o, secs)) => grouped.entry(key).or_default().push((repetition, o, secs)),
            Err(message) => errors.push(CellError { key, repetition, message }),
        }
    }
    errors.sort_by(|a, b| (&a.key, a.repetition).cmp(&(&b.key, b.repetition)));

    let cells = grouped
        .into_iter()
        .map(|(key, mut reps)| {
            reps.sort_by_key(|r| r.0);
            let accs: Vec<f64> = reps.iter().map(|r| r.1.mean_accuracy).collect();
            CellSummary {
                key,
                mean_accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
                sd: sample_sd(&accs),
                elapsed_secs: reps.iter().map(|r| r.2).sum(),
                repetitions: reps
                    .into_iter()
                    .map(|(repetition, o, _)| RepetitionRecord {
                        repetition,
                        mean_accuracy: o.mean_accuracy,
                        folds: o.folds,
                    })
                    .collect(),
            }
        })
        .collect();

    Ok(BenchmarkResult {
        metadata: BenchmarkMetadata {
            stratified_folds: true,
            tie_break: "highest mean inner accuracy, then smallest C, then smallest gamma".into(),
            seed: config.seed,
            config: config.clone(),
        },
        cells,
        errors,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

/// Long-form results: one line per (cell, repetition, outer fold).
pub fn write_long_csv<W: Write>(result: &BenchmarkResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["dataset", "mechanism", "p", "method", "repetition", "fold", "C", "gamma", "accuracy"])
        .map_err(io)?;
    for cell in &result.cells {
        for rep in &cell.repetitions {
            for f in &rep.folds {
                w.write_record([
                    cell.key.dataset.clone(),
                    cell.key.mechanism.to_string(),
                    cell.key.p.clone(),
                    cell.key.method.to_string(),
                    rep.repetition.to_string(),
                    f.fold.to_string(),
                    f.c.to_string(),
                    f.gamma.to_string(),
                    f.accuracy.to_string(),
                ])
                .map_err(io)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMode {
    /// One row per (dataset, mechanism, p).
    PerFraction,
    /// One row per (dataset, mechanism), accuracies averaged over p first.
    Collapsed,
}

impl RankMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RankMode::PerFraction => "per_fraction",
            RankMode::Collapsed => "collapsed",
        }
    }
}

impl FromStr for RankMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_fraction" | "per-fraction" => Ok(RankMode::PerFraction),
            "collapsed" => Ok(RankMode::Collapsed),
            other => Err(Error::invalid(format!("unknown rank mode {other:?}"))),
        }
    }
}

fn methods_of(result: &BenchmarkResult) -> Vec<Method> {
    let mut m: Vec<Method> = result.cells.iter().map(|c| c.key.method).collect();
    m.sort();
    m.dedup();
    m
}

/// Rank table over the benchmark's configurations.
///
/// Every configuration that produced any result must carry a result for
/// every method; otherwise the missing cell is reported.
pub fn rank_results(result: &BenchmarkResult, mode: RankMode) -> Result<RankTable> {
    let methods = methods_of(result);
    let names: Vec<String> = methods.iter().map(|m| m.to_string()).collect();
    let by_key: BTreeMap<&CellKey, f64> = result.cells.iter().map(|c| (&c.key, c.mean_accuracy)).collect();
    let configs: std::collections::BTreeSet<(String, Mechanism, String)> = result
        .cells
        .iter()
        .map(|c| &c.key)
        .chain(result.errors.iter().map(|e| &e.key))
        .map(|k| (k.dataset.clone(), k.mechanism, k.p.clone()))
        .collect();
    let mut rows: BTreeMap<String, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for (dataset, mechanism, p) in &configs {
        let label = match mode {
            RankMode::PerFraction => format!("{dataset}/{mechanism}/{p}"),
            RankMode::Collapsed => format!("{dataset}/{mechanism}"),
        };
        let row = rows.entry(label).or_default();
        for m in &methods {
            let key = CellKey { dataset: dataset.clone(), mechanism: *mechanism, p: p.clone(), method: *m };
            match by_key.get(&key) {
                Some(&acc) => row.entry(m.to_string()).or_default().push(acc),
                None => return Err(Error::MissingCell(format!("{dataset}/{mechanism}/{p}/{m}"))),
            }
        }
    }
    let cells: BTreeMap<String, BTreeMap<String, f64>> = rows
        .into_iter()
        .map(|(label, by_method)| {
            let averaged = by_method
                .into_iter()
                .map(|(m, v)| (m, v.iter().sum::<f64>() / v.len() as f64))
                .collect();
            (label, averaged)
        })
        .collect();
    stats::rank_methods(&names, &cells)
}

/// Mean rank of every method at each missing fraction (rows ranked per
/// (dataset, mechanism, p)).
pub fn rank_by_fraction(result: &BenchmarkResult) -> Result<(Vec<String>, Vec<(String, Vec<f64>)>)> {
    let table = rank_results(result, RankMode::PerFraction)?;
    let mut by_p: BTreeMap<String, Vec<&Vec<f64>>> = BTreeMap::new();
    for (label, ranks) in table.rows.iter().zip(&table.ranks) {
        let p = label.rsplit('/').next().unwrap_or_default().to_string();
        by_p.entry(p).or_default().push(ranks);
    }
    let k = table.n_methods();
    let out = by_p
        .into_iter()
        .map(|(p, rows)| {
            let means = (0..k).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64).collect();
            (p, means)
        })
        .collect();
    Ok((table.methods, out))
}

pub fn write_rank_by_fraction_csv<W: Write>(result: &BenchmarkResult, writer: W) -> Result<()> {
    let (methods, rows) = rank_by_fraction(result)?;
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let mut header = vec!["p".to_string()];
    header.extend(methods);
    w.write_record(&header).map_err(io)?;
    for (p, ranks) in rows {
        let mut rec = vec![p];
        rec.extend(ranks.iter().map(|r| r.to_string()));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Rank table plus, when the table is large enough, the Friedman test and
/// the critical-difference diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub mode: RankMode,
    pub table: RankTable,
    pub cd_diagram: Option<stats::CdDiagram>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

pub fn rank_report(result: &BenchmarkResult, mode: RankMode, alpha: stats::Alpha) -> Result<RankReport> {
    let table = rank_results(result, mode)?;
    let (cd_diagram, note) = match stats::cd_diagram(&table, alpha, mode.as_str()) {
        Ok(d) => (Some(d), None),
        Err(e) => (None, Some(format!("significance analysis skipped: {e}"))),
    };
    Ok(RankReport { mode, table, cd_diagram, note })
}

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use genrbf::bench::{self, ExperimentConfig, FoldPreprocessor, Method, NamedDataset, RankMode};
use genrbf::data::{self, CsvOptions, Dataset, LabelColumn, StandardizationParams};
use genrbf::density::{self, EmConfig, GaussianModel, Ridge};
use genrbf::kernel::{self, KernelParams};
use genrbf::missingness::{self, Mechanism, MissingnessSpec};
use genrbf::representation::Conditioner;
use genrbf::stats::Alpha;
use genrbf::subspace::MissingSubspacePoint;
use genrbf::svm::{self, SvmModel, TrainConfig};
use genrbf::{datasets, linalg};

const EXIT_PARTIAL: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "genrbf", version, about = "Kernel SVM for incomplete data")]
struct Cli {
    /// Directory for outputs given as relative paths.
    #[arg(long, global = true, env = "GENRBF_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Root seed; overrides the seed of the subcommand or benchmark config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Where to write the run manifest (default: <out-dir>/<command>.manifest.json).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
enum Command {
    /// Remove entries from a complete dataset (MCAR, MAR or NMAR).
    Inject(InjectArgs),
    /// Fit a Gaussian to incomplete data by EM.
    Estimate(EstimateArgs),
    /// Write the kernel Gram matrix of a dataset.
    Gram(GramArgs),
    /// Train an SVM and save a self-contained model bundle.
    Train(TrainArgs),
    /// Predict with a model bundle.
    Predict(PredictArgs),
    /// Run the double cross-validation benchmark from a JSON config.
    Benchmark(BenchmarkArgs),
    /// Rank methods from a benchmark summary.
    Rank(RankArgs),
    /// Re-run the command recorded in a manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Inject(_) => "inject",
            Command::Estimate(_) => "estimate",
            Command::Gram(_) => "gram",
            Command::Train(_) => "train",
            Command::Predict(_) => "predict",
            Command::Benchmark(_) => "benchmark",
            Command::Rank(_) => "rank",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct InputArgs {
    /// Input CSV; the label column holds two distinct classes.
    input: PathBuf,
    /// Label column: "last", a 0-based index, or a header name.
    #[arg(long, default_value = "last")]
    label_column: String,
    /// Tokens read as missing, in addition to the empty cell.
    #[arg(long = "na", default_values_t = [String::from("NA"), String::from("?")])]
    na: Vec<String>,
    /// Treat the first row as data even if it looks like a header.
    #[arg(long)]
    no_header: bool,
}

impl InputArgs {
    fn resolve(&mut self) -> Result<()> {
        self.input = fs::canonicalize(&self.input).with_context(|| format!("cannot open {}", self.input.display()))?;
        Ok(())
    }

    fn load(&self) -> Result<Dataset> {
        let mut missing_tokens = self.na.clone();
        missing_tokens.push(String::new());
        let opts = CsvOptions {
            missing_tokens,
            label_column: self.label_column.parse::<LabelColumn>().expect("infallible"),
            has_header: if self.no_header { Some(false) } else { None },
        };
        data::load_csv(&self.input, &opts).with_context(|| format!("reading {}", self.input.display()))
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct EmArgs {
    #[arg(long, default_value_t = 1000)]
    em_max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    em_tol: f64,
    /// Fixed diagonal ridge; default scales with the data.
    #[arg(long)]
    ridge: Option<f64>,
}

impl EmArgs {
    fn config(&self) -> EmConfig {
        EmConfig {
            max_iters: self.em_max_iters,
            tol: self.em_tol,
            ridge: self.ridge.map_or(Ridge::Auto, Ridge::Fixed),
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct InjectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long = "mech", alias = "mechanism")]
    mechanism: Mechanism,
    /// Target missing fraction.
    #[arg(long)]
    p: f64,
    /// Anchor rows for MAR/NMAR (default: feature count).
    #[arg(long)]
    anchors: Option<usize>,
    #[arg(long, short, default_value = "injected.csv")]
    output: PathBuf,
    /// Mask manifest path (default: output with `.mask.json`).
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(skip)]
    seed: u64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    em: EmArgs,
    #[arg(long, short, default_value = "gaussian.json")]
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum GramFormat {
    Csv,
    Binary,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct GramArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    gamma: f64,
    #[command(flatten)]
    em: EmArgs,
    /// Z-score features (observed entries) before estimation.
    #[arg(long)]
    standardize: bool,
    /// Map data through the affine whitening `Σ^{-1/2}(x - m)` of the fitted Gaussian.
    #[arg(long)]
    whiten: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: GramFormat,
    #[arg(long, short, default_value = "gram.csv")]
    output: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct TrainArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long = "c", short = 'c')]
    c: f64,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value = "genrbf")]
    method: Method,
    #[arg(long, default_value_t = 1e-3)]
    svm_tol: f64,
    #[arg(long, default_value_t = 100_000)]
    svm_max_passes: usize,
    #[command(flatten)]
    em: EmArgs,
    #[arg(long, short, default_value = "model.json")]
    output: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct PredictArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Model bundle written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, short, default_value = "predictions.csv")]
    output: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct BenchmarkArgs {
    /// JSON benchmark config.
    #[arg(required = true)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// The parsed config, embedded in the manifest.
    #[arg(skip)]
    resolved: Option<BenchmarkConfig>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct RankArgs {
    /// Benchmark summary JSON.
    summary: PathBuf,
    #[arg(long, default_value = "per_fraction")]
    mode: RankMode,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, short, default_value = "ranks.json")]
    output: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct ReplayArgs {
    /// Manifest written by a previous run.
    from: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetEntry {
    name: String,
    /// CSV path; omitted for built-in datasets (`pima`, `breast_cancer`).
    #[serde(default)]
    path: Option<PathBuf>,
    #[serde(default = "default_label_column")]
    label_column: String,
}

fn default_label_column() -> String {
    "last".into()
}

fn default_mechanisms() -> Vec<Mechanism> {
    vec![Mechanism::Mcar, Mechanism::Mar, Mechanism::Nmar]
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchmarkConfig {
    datasets: Vec<DatasetEntry>,
    #[serde(default = "default_mechanisms")]
    mechanisms: Vec<Mechanism>,
    fractions: Vec<f64>,
    #[serde(default)]
    experiment: ExperimentConfig,
    #[serde(default = "default_rank_mode")]
    rank_mode: RankMode,
    #[serde(default = "default_alpha")]
    alpha: f64,
}

fn default_rank_mode() -> RankMode {
    RankMode::PerFraction
}

/// Standardization, fitted preprocessing and SVM in one file.
#[derive(Debug, Serialize, Deserialize)]
struct ModelBundle {
    method: Method,
    n_features: usize,
    label_names: Option<[String; 2]>,
    standardization: StandardizationParams,
    gaussian: Option<GaussianModel>,
    impute_means: Option<Vec<f64>>,
    svm: SvmModel,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    tool: String,
    version: String,
    out_dir: PathBuf,
    seed: Option<u64>,
    /// Named random substreams derived from the root seed.
    substreams: BTreeMap<String, String>,
    outputs: Vec<PathBuf>,
    invocation: Command,
}

struct Ctx {
    out_dir: PathBuf,
    outputs: Vec<PathBuf>,
}

impl Ctx {
    fn path(&mut self, p: &Path) -> Result<PathBuf> {
        let full = if p.is_absolute() { p.to_path_buf() } else { self.out_dir.join(p) };
        if let Some(parent) = full.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        self.outputs.push(p.to_path_buf());
        Ok(full)
    }

    fn create(&mut self, p: &Path) -> Result<BufWriter<fs::File>> {
        let full = self.path(p)?;
        let file = fs::File::create(&full).with_context(|| format!("creating {}", full.display()))?;
        Ok(BufWriter::new(file))
    }

    fn write_json<T: Serialize>(&mut self, p: &Path, value: &T) -> Result<()> {
        let mut w = self.create(p)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let (command, out_dir, seed) = match cli.command {
        Command::Replay(r) => {
            let text = fs::read_to_string(&r.from).with_context(|| format!("reading {}", r.from.display()))?;
            let m: Manifest = serde_json::from_str(&text).context("parsing manifest")?;
            // An explicit --out-dir redirects the replay; otherwise reuse the recorded one.
            let out_dir = if std::env::args().any(|a| a == "--out-dir" || a.starts_with("--out-dir=")) {
                cli.out_dir
            } else {
                m.out_dir
            };
            (m.invocation, out_dir, m.seed)
        }
        mut c => {
            let seed = resolve(&mut c, cli.seed)?;
            (c, cli.out_dir, seed)
        }
    };
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let out_dir = fs::canonicalize(&out_dir)?;
    let mut ctx = Ctx { out_dir: out_dir.clone(), outputs: Vec::new() };

    let code = match &command {
        Command::Inject(a) => cmd_inject(a, &mut ctx)?,
        Command::Estimate(a) => cmd_estimate(a, &mut ctx)?,
        Command::Gram(a) => cmd_gram(a, &mut ctx)?,
        Command::Train(a) => cmd_train(a, &mut ctx)?,
        Command::Predict(a) => cmd_predict(a, &mut ctx)?,
        Command::Benchmark(a) => cmd_benchmark(a, &mut ctx)?,
        Command::Rank(a) => cmd_rank(a, &mut ctx)?,
        Command::Replay(_) => unreachable!("replay resolved above"),
    };

    let manifest_path = cli
        .manifest
        .unwrap_or_else(|| PathBuf::from(format!("{}.manifest.json", command.name())));
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        out_dir,
        seed,
        substreams: substreams(&command),
        outputs: ctx.outputs.clone(),
        invocation: command,
    };
    ctx.outputs.clear();
    ctx.write_json(&manifest_path, &manifest)?;
    Ok(code)
}

/// Makes the command self-contained: absolute input paths, explicit seed,
/// parsed benchmark config.
fn resolve(command: &mut Command, seed: Option<u64>) -> Result<Option<u64>> {
    Ok(match command {
        Command::Inject(a) => {
            a.input.resolve()?;
            a.seed = seed.unwrap_or(0);
            Some(a.seed)
        }
        Command::Estimate(a) => {
            a.input.resolve()?;
            None
        }
        Command::Gram(a) => {
            a.input.resolve()?;
            None
        }
        Command::Train(a) => {
            a.input.resolve()?;
            None
        }
        Command::Predict(a) => {
            a.input.resolve()?;
            a.model = fs::canonicalize(&a.model).with_context(|| format!("cannot open {}", a.model.display()))?;
            None
        }
        Command::Benchmark(a) => {
            let path = a.config.clone().expect("required by clap");
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let mut cfg: BenchmarkConfig =
                serde_json::from_str(&text).with_context(|| format!("invalid benchmark config {}", path.display()))?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            for d in &mut cfg.datasets {
                if let Some(p) = &d.path {
                    let joined = if p.is_absolute() { p.clone() } else { base.join(p) };
                    d.path = Some(fs::canonicalize(&joined).with_context(|| format!("cannot open {}", joined.display()))?);
                }
            }
            if let Some(s) = seed {
                cfg.experiment.seed = s;
            }
            let s = cfg.experiment.seed;
            a.resolved = Some(cfg);
            Some(s)
        }
        Command::Rank(a) => {
            a.summary = fs::canonicalize(&a.summary).with_context(|| format!("cannot open {}", a.summary.display()))?;
            None
        }
        Command::Replay(_) => None,
    })
}

fn substreams(command: &Command) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    match command {
        Command::Inject(_) => {
            m.insert("mcar".into(), "stream(seed, \"mcar\"): exact-count cell sample".into());
            m.insert("anchors".into(), "stream(seed, \"anchors\"): MAR/NMAR anchor rows".into());
            m.insert("split".into(), "stream(seed, \"split\"): NMAR visible/hidden features".into());
            m.insert("cells".into(), "derive_named(seed, \"cells\"): per-cell uniforms".into());
        }
        Command::Benchmark(_) => {
            m.insert("inject".into(), "derive_named(seed, \"inject/<dataset>/<mech>/<p>/<rep>\")".into());
            m.insert("folds".into(), "derive_named(seed, \"folds/<dataset>/<mech>/<p>/<rep>\"), shared by all methods".into());
            m.insert("smo".into(), "unused: the SMO solver is deterministic".into());
        }
        _ => {}
    }
    m
}

fn cmd_inject(a: &InjectArgs, ctx: &mut Ctx) -> Result<ExitCode> {
    let data = a.input.load()?;
    let spec = MissingnessSpec { mechanism: a.mechanism, p: a.p, seed: a.seed, anchor_count: a.anchors };
    let injection = missingness::inject(&data, &spec)?;
    let mut w = ctx.create(&a.output)?;
    data::write_csv(&injection.data, &mut w)?;
    w.flush()?;
    let mask = a.mask.clone().unwrap_or_else(|| a.output.with_extension("mask.json"));
    ctx.write_json(&mask, &injection.manifest)?;
    eprintln!(
        "{}: removed {:.4} of entries ({} rows x {} features)",
        a.mechanism,
        injection.manifest.realized_fraction,
        injection.data.len(),
        injection.data.n_features()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_estimate(a: &EstimateArgs, ctx: &mut Ctx) -> Result<ExitCode> {
    let data = a.input.load()?;
    let report = density::estimate_em_report(&data, &a.em.config())?;
    if !report.converged {
        eprintln!("warning: EM stopped after {} iterations without converging", report.iterations);
    }
    ctx.write_json(&a.output, &report.model)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_gram(a: &GramArgs, ctx: &mut Ctx) -> Result<ExitCode> {
    let params = KernelParams::new(a.gamma)?;
    let mut data = a.input.load()?;
    if a.standardize {
        let s = data::fit_standardization(&data)?;
        data = data::apply_standardization(&data, &s)?;
    }
    let mut subspaces: Vec<MissingSubspacePoint> =
        data.points().iter().map(MissingSubspacePoint::from_incomplete).collect();
    let reps = if data.is_complete() && !a.whiten {
        subspaces.iter().map(|s| genrbf::PointRepresentation::dirac(s.base().clone())).collect()
    } else {
        let mut model = density::estimate_em_report(&data, &a.em.config())?.model;
        if a.whiten {
            let w = linalg::sym_inv_sqrt(model.covariance())?;
            let shift = -(&w * model.mean());
            subspaces = subspaces.iter().map(|s| s.transform_affine(&w, &shift)).collect::<genrbf::Result<_>>()?;
            model = model.affine_image(&w, &shift)?;
        }
        Conditioner::new(&model)?.condition_all(&subspaces)?
    };
    let gram = kernel::gram(&reps, &params)?;
    let mut w = ctx.create(&a.output)?;
    match a.format {
        GramFormat::Csv => gram.write_csv(&mut w)?,
        GramFormat::Binary => gram.write_binary(&mut w)?,
    }
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_train(a: &TrainArgs, ctx: &mut Ctx) -> Result<ExitCode> {
    let data = a.input.load()?;
    let params = KernelParams::new(a.gamma)?;
    let prep = FoldPreprocessor::fit(&data, a.method, &a.em.config())?;
    let reps = prep.represent(&data)?;
    let gram = kernel::gram(&reps, &params)?;
    let cfg = TrainConfig { c: a.c, tol: a.svm_tol, max_passes: a.svm_max_passes };
    let model = svm::train(&gram, data.labels(), &cfg)?.with_support_reps(params, &reps)?;
    if !model.converged {
        eprintln!("warning: SMO hit the iteration limit before meeting the tolerance");
    }
    eprintln!(
        "trained on {} rows: {} support vectors, training accuracy {:.4}",
        data.len(),
        model.n_support(),
        model.training_accuracy
    );
    let bundle = ModelBundle {
        method: a.method,
        n_features: data.n_features(),
        label_names: data.label_names().cloned(),
        standardization: prep.standardization,
        gaussian: prep.gaussian,
        impute_means: prep.impute_means,
        svm: model,
    };
    ctx.write_json(&a.output, &bundle)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_predict(a: &PredictArgs, ctx: &mut Ctx) -> Result<ExitCode> {
    let text = fs::read_to_string(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let bundle: ModelBundle = serde_json::from_str(&text).context("parsing model bundle")?;
    let data = a.input.load()?;
    if data.n_features() != bundle.n_features {
        bail!("model expects {} features, input has {}", bundle.n_features, data.n_features());
    }
    let params = bundle.svm.kernel.context("model bundle has no kernel parameters")?;
    let prep = FoldPreprocessor {
        method: bundle.method,
        standardization: bundle.standardization,
        gaussian: bundle.gaussian,
        impute_means: bundle.impute_means,
    };
    let reps = prep.represent(&data)?;
    let cross = kernel::gram_cross(&reps, &bundle.svm.support_reps, &params)?;
    let decisions = bundle.svm.decision_values(&cross)?;
    let predicted = svm::predict(&bundle.svm, &cross)?;
    let name = |l: i8| match &bundle.label_names {
        Some([neg, pos]) => if l > 0 { pos.clone() } else { neg.clone() },
        None => l.to_string(),
    };
    let mut w = csv::Writer::from_writer(ctx.create(&a.output)?);
    w.write_record(["row", "decision", "predicted", "actual"])?;
    for (i, (d, p)) in decisions.iter().zip(&predicted).enumerate() {
        w.write_record([i.to_string(), d.to_string(), name(*p), name(data.labels()[i])])?;
    }
    w.flush()?;
    eprintln!("accuracy {:.4} on {} rows", svm::accuracy(&predicted, data.labels()), data.len());
    Ok(ExitCode::SUCCESS)
}

fn cmd_benchmark(a: &BenchmarkArgs, ctx: &mut Ctx) -> Result<ExitCode> {
    let cfg = a.resolved.as_ref().expect("resolved before dispatch");
    cfg.experiment.validate()?;
    let alpha = Alpha::from_value(cfg.alpha)?;
    if cfg.datasets.is_empty() || cfg.mechanisms.is_empty() || cfg.fractions.is_empty() {
        bail!("datasets, mechanisms and fractions must be nonempty");
    }
    let mut named = Vec::with_capacity(cfg.datasets.len());
    for d in &cfg.datasets {
        let data = match &d.path {
            Some(p) => {
                let input = InputArgs {
                    input: p.clone(),
                    label_column: d.label_column.clone(),
                    na: vec!["NA".into(), "?".into()],
                    no_header: false,
                };
                input.load()?
            }
            None => datasets::load(&d.name)?,
        };
        if !data.is_complete() {
            bail!("dataset {} has missing entries; benchmark inputs must be complete", d.name);
        }
        named.push(NamedDataset { name: d.name.clone(), data });
    }

    let result = bench::run_benchmark(&named, &cfg.mechanisms, &cfg.fractions, &cfg.experiment)?;

    let w = ctx.create(Path::new("results.csv"))?;
    bench::write_long_csv(&result, w)?;
    ctx.write_json(Path::new("summary.json"), &result)?;
    match bench::rank_report(&result, cfg.rank_mode, alpha) {
        Ok(report) => {
            ctx.write_json(Path::new("ranks.json"), &report)?;
            let w = ctx.create(Path::new("rank_by_fraction.csv"))?;
            bench::write_rank_by_fraction_csv(&result, w)?;
        }
        Err(e) => eprintln!("warning: ranking skipped: {e}"),
    }
    eprintln!(
        "benchmark: {} cells, {} errors, {:.1}s",
        result.cells.len(),
        result.errors.len(),
        result.elapsed_secs
    );
    if result.is_complete() {
        Ok(ExitCode::SUCCESS)
    } else {
        for e in &result.errors {
            eprintln!(
                "failed: {}/{}/{}/{} repetition {}: {}",
                e.key.dataset, e.key.mechanism, e.key.p, e.key.method, e.repetition, e.message
            );
        }
        ctx.write_json(Path::new("errors.json"), &result.errors)?;
        Ok(ExitCode::from(EXIT_PARTIAL))
    }
}

fn cmd_rank(a: &RankArgs, ctx: &mut Ctx) -> Result<ExitCode> {
    let text = fs::read_to_string(&a.summary).with_context(|| format!("reading {}", a.summary.display()))?;
    let result: bench::BenchmarkResult = serde_json::from_str(&text).context("parsing benchmark summary")?;
    let report = bench::rank_report(&result, a.mode, Alpha::from_value(a.alpha)?)?;
    if let Some(d) = &report.cd_diagram {
        eprintln!(
            "Friedman chi2 = {:.4} (df {}), p = {:.4}; CD = {:.4}",
            d.friedman.statistic, d.friedman.degrees_of_freedom, d.friedman.p_value, d.cd
        );
    }
    ctx.write_json(&a.output, &report)?;
    Ok(ExitCode::SUCCESS)
}

//! `simulate`, `fit`, `tune`, `bench` and `report`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use tenmtl::baselines::{fit_global_per_task, fit_local, fit_lr_tucker, DEFAULT_RIDGE};
use tenmtl::metrics::{classification_accuracy, rmse};
use tenmtl::simgen::{generate_dataset, ScenarioConfig};
use tenmtl::tenmtl::{
    fit, fit_vector, predict_task, reconstruct_models, FitTrace, HyperParams, Penalties,
    TaskLayout, VectorParams,
};
use tenmtl::tuning::{kfold_cv, ExperimentConfig, ExperimentResults, Grid, Method, ResultRow};
use tenmtl::{Family, PersonalizedModel, TaskDataset};

use crate::io::{
    read_dataset, read_json, write_dataset, write_dir_atomically, write_file_atomically,
    write_json, write_model_files, Dataset, ModelArtifact,
};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "tenmtl", version, about = "Personalized multi-task tensor regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset tree from a scenario config.
    Simulate(SimulateArgs),
    /// Fit one estimator to a dataset tree.
    Fit(FitArgs),
    /// Cross-validate the joint estimator over a grid.
    Tune(TuneArgs),
    /// Run a replicated simulation experiment.
    Bench(BenchArgs),
    /// Re-emit saved experiment results.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Tenmtl,
    TenmtlVector,
    Local,
    Global,
    LrTucker,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Bernoulli,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Gaussian => Family::Gaussian,
            FamilyArg::Bernoulli => Family::Bernoulli,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "tenmtl")]
    pub method: MethodArg,
    /// Output directory for model.json, blobs, metrics.json and trace.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Estimator settings (JSON `HyperParams` for tenmtl, `VectorParams` for
    /// tenmtl-vector); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Tensor-side ranks `R0,R1,…,Rm` (for vector-only data: `R0,R1`).
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,
    /// Scalar-side ranks `T0,T1`.
    #[arg(long, value_delimiter = ',')]
    pub scalar_ranks: Option<Vec<usize>>,
    /// Shared task-factor columns.
    #[arg(long)]
    pub shared: Option<usize>,
    /// Tied lasso weight.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Ridge for underdetermined local fits.
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Overrides the dataset family.
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Output report (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Grid (JSON); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub task_ranks: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub feature_ranks: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Pivot to one row per setting and one column per method.
    #[arg(long)]
    pub table: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Results written by `bench --format json`.
    #[arg(long)]
    pub results: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    pub table: bool,
}

/// Runs a parsed command and returns the text to print on success.
pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Fit(a) => fit_cmd(&a),
        Command::Tune(a) => tune(&a),
        Command::Bench(a) => bench(&a),
        Command::Report(a) => report(&a),
    }
}

fn load_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Io(crate::io::IoError::Fs {
            path: path.to_path_buf(),
            source: e,
        })
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn simulate(a: &SimulateArgs) -> Result<String, CliError> {
    let mut cfg: ScenarioConfig = load_config(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let generated = generate_dataset(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
    let ds = Dataset::from_generated(&generated);
    write_dataset(&a.out, &ds)?;
    Ok(format!(
        "scenario {}: N={} tasks, n_i={} train + {} test, dims {:?}, seed {}\n",
        cfg.scenario.label(),
        cfg.n_tasks,
        cfg.n_train,
        cfg.n_test,
        cfg.dims,
        cfg.seed
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub task_id: String,
    pub train: f64,
    pub test: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics {
    pub method: String,
    pub family: Family,
    /// `rmse` or `accuracy`.
    pub metric: String,
    pub tasks: Vec<TaskMetrics>,
    pub mean_train: f64,
    pub mean_test: Option<f64>,
}

fn task_metric(m: &PersonalizedModel, t: &TaskDataset, family: Family) -> Result<Option<f64>, CliError> {
    if t.n_samples() == 0 {
        return Ok(None);
    }
    let pred = predict_task(m, t, family)?;
    let v = match family {
        Family::Gaussian => rmse(&pred, &t.y),
        Family::Bernoulli => classification_accuracy(&pred, &t.y, 0.5),
    }
    .map_err(|e| CliError::Numerical(e.to_string()))?;
    if !v.is_finite() {
        return Err(CliError::Numerical("non-finite prediction".into()));
    }
    Ok(Some(v))
}

pub fn evaluate(
    method: &str,
    models: &[PersonalizedModel],
    ds: &Dataset,
    family: Family,
) -> Result<FitMetrics, CliError> {
    let mut tasks = Vec::with_capacity(models.len());
    for ((m, train), test) in models.iter().zip(&ds.train).zip(&ds.test) {
        tasks.push(TaskMetrics {
            task_id: train.task_id.clone(),
            train: task_metric(m, train, family)?.unwrap_or(f64::NAN),
            test: task_metric(m, test, family)?,
        });
    }
    let n = tasks.len() as f64;
    let tests: Vec<f64> = tasks.iter().filter_map(|t| t.test).collect();
    Ok(FitMetrics {
        method: method.to_string(),
        family,
        metric: match family {
            Family::Gaussian => "rmse",
            Family::Bernoulli => "accuracy",
        }
        .into(),
        mean_train: tasks.iter().map(|t| t.train).sum::<f64>() / n,
        mean_test: (!tests.is_empty()).then(|| tests.iter().sum::<f64>() / tests.len() as f64),
        tasks,
    })
}

fn two_ranks(v: &[usize], flag: &str) -> Result<[usize; 2], CliError> {
    match v {
        [a, b] => Ok([*a, *b]),
        _ => Err(CliError::Config(format!("--{flag} takes exactly two values"))),
    }
}

fn tenmtl_hyper(a: &FitArgs, layout: &TaskLayout, family: Family) -> Result<HyperParams, CliError> {
    let mut h: HyperParams = match &a.config {
        Some(p) => load_config(p)?,
        None => HyperParams::default(),
    };
    h.family = family;
    if let Some(r) = &a.ranks {
        if layout.tensor_shape.is_none() && a.scalar_ranks.is_none() {
            h.scalar_ranks = two_ranks(r, "ranks")?;
        } else {
            h.tensor_ranks = r.clone();
        }
    }
    if let Some(t) = &a.scalar_ranks {
        h.scalar_ranks = two_ranks(t, "scalar-ranks")?;
    }
    if a.shared.is_some() {
        h.shared = a.shared;
    }
    if let Some(l) = a.lambda {
        h.penalties = Penalties::tied(l);
    }
    if let Some(e) = a.epsilon {
        h.epsilon = e;
    }
    if let Some(m) = a.max_iter {
        h.max_iter = m;
    }
    if let Some(r) = a.ridge {
        h.init_ridge = r;
    }
    Ok(h)
}

fn vector_params(a: &FitArgs, family: Family) -> Result<VectorParams, CliError> {
    let mut vp: VectorParams = match &a.config {
        Some(p) => load_config(p)?,
        None => VectorParams::default(),
    };
    vp.family = family;
    if let Some(r) = a.ranks.as_ref().or(a.scalar_ranks.as_ref()) {
        let [r0, r1] = two_ranks(r, "ranks")?;
        vp.task_rank = r0;
        vp.feature_rank = r1;
    }
    if let Some(l) = a.lambda {
        vp.lambda_g = l;
        vp.lambda_u = l;
    }
    if let Some(e) = a.epsilon {
        vp.epsilon = e;
    }
    if let Some(m) = a.max_iter {
        vp.max_iter = m;
    }
    if let Some(r) = a.ridge {
        vp.init_ridge = r;
    }
    Ok(vp)
}

/// Writes whatever the fit produced; the model only exists on success.
fn write_fit_outputs(
    out: &Path,
    artifact: Option<&ModelArtifact>,
    metrics: Option<&FitMetrics>,
    trace: &serde_json::Value,
    family: Family,
) -> Result<(), CliError> {
    write_dir_atomically(out, "trace.json", |dir| {
        if let Some(a) = artifact {
            write_model_files(dir, a, family)?;
        }
        if let Some(m) = metrics {
            write_json(&dir.join("metrics.json"), m)?;
        }
        write_json(&dir.join("trace.json"), trace)
    })?;
    Ok(())
}

pub fn fit_cmd(a: &FitArgs) -> Result<String, CliError> {
    let ds = read_dataset(&a.data)?;
    let family = a.family.map(Family::from).unwrap_or(ds.manifest.family);
    let layout = TaskLayout::of(&ds.train)?;
    let ridge = a.ridge.unwrap_or(DEFAULT_RIDGE);

    let result: Result<(ModelArtifact, Vec<PersonalizedModel>, Option<FitTrace>), CliError> =
        match a.method {
            MethodArg::Tenmtl => {
                let h = tenmtl_hyper(a, &layout, family)?;
                h.resolve(&layout)?;
                fit(&ds.train, &h).map_err(CliError::from).map(|(state, trace)| {
                    let models = reconstruct_models(&state);
                    (ModelArtifact::Tucker { state, hyper: h }, models, Some(trace))
                })
            }
            MethodArg::TenmtlVector => {
                let vp = vector_params(a, family)?;
                fit_vector(&ds.train, &vp)
                    .map_err(CliError::from)
                    .map(|(state, trace)| {
                        let models = state.models();
                        (ModelArtifact::Vector { state, params: vp }, models, Some(trace))
                    })
            }
            MethodArg::Local | MethodArg::Global | MethodArg::LrTucker => {
                let (name, models) = match a.method {
                    MethodArg::Local => ("local", fit_local(&ds.train, family, ridge)),
                    MethodArg::Global => ("global", fit_global_per_task(&ds.train, family, ridge)),
                    _ => {
                        let h = tenmtl_hyper(a, &layout, family)?;
                        let tensor = layout.tensor_shape.as_ref().map(|_| h.tensor_ranks.as_slice());
                        let scalar = (layout.n_scalar > 0).then_some(h.scalar_ranks);
                        ("lr-tucker", fit_lr_tucker(&ds.train, family, tensor, scalar, ridge))
                    }
                };
                models.map_err(CliError::from).map(|m| {
                    (
                        ModelArtifact::Personalized {
                            method: name.to_string(),
                            models: m.clone(),
                        },
                        m,
                        None,
                    )
                })
            }
        };

    let method = method_name(a.method);
    match result {
        Ok((artifact, models, trace)) => {
            let metrics = evaluate(method, &models, &ds, family);
            let trace_json = serde_json::to_value(&trace).expect("serializable trace");
            match metrics {
                Ok(m) => {
                    write_fit_outputs(&a.out, Some(&artifact), Some(&m), &trace_json, family)?;
                    Ok(fit_summary(&m))
                }
                Err(e) => {
                    let t = serde_json::json!({ "trace": trace_json, "error": e.to_string() });
                    write_fit_outputs(&a.out, Some(&artifact), None, &t, family)?;
                    Err(e)
                }
            }
        }
        Err(e) => {
            let t = serde_json::json!({ "trace": null, "error": e.to_string() });
            write_fit_outputs(&a.out, None, None, &t, family)?;
            Err(e)
        }
    }
}

fn method_name(m: MethodArg) -> &'static str {
    match m {
        MethodArg::Tenmtl => "tenmtl",
        MethodArg::TenmtlVector => "tenmtl-vector",
        MethodArg::Local => "local",
        MethodArg::Global => "global",
        MethodArg::LrTucker => "lr-tucker",
    }
}

fn fit_summary(m: &FitMetrics) -> String {
    let mut s = format!("{}: mean train {} {}", m.method, m.metric, m.mean_train);
    if let Some(t) = m.mean_test {
        let _ = write!(s, ", mean test {} {}", m.metric, t);
    }
    s.push('\n');
    s
}

pub fn tune(a: &TuneArgs) -> Result<String, CliError> {
    let ds = read_dataset(&a.data)?;
    let family = a.family.map(Family::from).unwrap_or(ds.manifest.family);
    let mut grid: Grid = match &a.config {
        Some(p) => load_config(p)?,
        None => Grid::default(),
    };
    if let Some(v) = &a.task_ranks {
        grid.task_ranks = v.clone();
    }
    if let Some(v) = &a.feature_ranks {
        grid.feature_ranks = v.clone();
    }
    if let Some(v) = &a.lambdas {
        grid.lambdas = v.clone();
    }
    if let Some(k) = a.folds {
        grid.folds = k;
    }
    if let Some(s) = a.seed {
        grid.seed = s;
    }
    grid.validate()?;
    let min_n = ds.train.iter().map(TaskDataset::n_samples).min().unwrap_or(0);
    if grid.folds > min_n {
        return Err(CliError::Precondition(format!(
            "{} folds requested but the smallest task has {} training samples",
            grid.folds, min_n
        )));
    }
    let mut settings = tenmtl::tuning::FitSettings {
        family,
        ..Default::default()
    };
    if let Some(e) = a.epsilon {
        settings.epsilon = e;
    }
    if let Some(m) = a.max_iter {
        settings.max_iter = m;
    }
    let report = kfold_cv(&ds.train, &grid, &settings)?;
    let text = serde_json::to_string_pretty(&report).expect("serializable report") + "\n";
    write_file_atomically(&a.out, text.as_bytes())?;
    let t = report.selected_tuple();
    Ok(format!(
        "selected ranks {:?}, scalar ranks {:?}, lambda {} (score {})\n",
        t.tensor_ranks, t.scalar_ranks, t.lambda, report.scores[report.selected]
    ))
}

/// One CSV row per method and setting.
pub fn rows_csv(rows: &[ResultRow]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8 csv"))
}

/// One row per `(β_u, σ_e, s)` with a `mean (std)` column per method.
pub fn pivot_csv(rows: &[ResultRow]) -> Result<String, CliError> {
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let key = |r: &ResultRow| (r.beta_u.to_bits(), r.sigma_e.to_bits(), r.s.to_bits());
    let mut order: Vec<(u64, u64, u64)> = Vec::new();
    let mut cells: BTreeMap<((u64, u64, u64), &str), String> = BTreeMap::new();
    for r in rows {
        let k = key(r);
        if !order.contains(&k) {
            order.push(k);
        }
        cells.insert((k, &r.method), format!("{:.3} ({:.3})", r.mean_rmse, r.std_rmse));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["beta_u".to_string(), "sigma_e".into(), "s".into()];
    header.extend(methods.iter().map(|m| m.to_string()));
    w.write_record(&header)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    for k in order {
        let mut rec = vec![
            f64::from_bits(k.0).to_string(),
            f64::from_bits(k.1).to_string(),
            f64::from_bits(k.2).to_string(),
        ];
        for m in &methods {
            rec.push(cells.get(&(k, *m)).cloned().unwrap_or_default());
        }
        w.write_record(&rec)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8 csv"))
}

fn render(results: &ExperimentResults, format: Format, table: bool) -> Result<String, CliError> {
    match (format, table) {
        (Format::Json, _) => {
            Ok(serde_json::to_string_pretty(results).expect("serializable results") + "\n")
        }
        (Format::Csv, true) => pivot_csv(&results.rows),
        (Format::Csv, false) => rows_csv(&results.rows),
    }
}

pub fn bench(a: &BenchArgs) -> Result<String, CliError> {
    let mut cfg: ExperimentConfig = load_config(&a.config)?;
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    cfg.validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let results = tenmtl::tuning::run_experiment(&cfg)?;
    let text = render(&results, a.format, a.table)?;
    write_file_atomically(&a.out, text.as_bytes())?;
    let failures = results.replications.iter().filter(|r| r.error.is_some()).count();
    let mut summary = pivot_csv(&results.rows)?;
    if failures > 0 {
        let _ = writeln!(summary, "{failures} method fits failed; see the JSON output for details");
    }
    Ok(summary)
}

pub fn report(a: &ReportArgs) -> Result<String, CliError> {
    let results: ExperimentResults = read_json(&a.results)?;
    let text = render(&results, a.format, a.table)?;
    match &a.out {
        Some(p) => {
            write_file_atomically(p, text.as_bytes())?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

/// Methods accepted by `bench` configs, for error messages.
pub fn method_list() -> String {
    [
        Method::Tenmtl,
        Method::TenmtlVector,
        Method::Local,
        Method::Global,
        Method::LrTucker,
    ]
    .iter()
    .map(|m| m.name())
    .collect::<Vec<_>>()
    .join(", ")
}

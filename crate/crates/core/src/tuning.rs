//! K-fold hyperparameter selection and replicated simulation experiments.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{fit_global_per_task, fit_local, fit_lr_tucker, DEFAULT_RIDGE};
use crate::glm::Family;
use crate::metrics::{classification_accuracy, mean_std, rmse};
use crate::simgen::{generate_dataset, ScenarioConfig, SimError};
use crate::tenmtl::{
    fit, fit_vector, predict_task, reconstruct_models, FitError, HyperParams, Penalties,
    PersonalizedModel, TaskDataset, TaskLayout, VectorParams,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TuningError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("task {task} has {samples} samples, fewer than {folds} folds")]
    TooFewSamples {
        task: String,
        samples: usize,
        folds: usize,
    },
    #[error("no grid tuple could be fitted")]
    NoValidTuple,
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Estimators compared in experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Joint Tucker estimator.
    Tenmtl,
    /// Vector-only alternating estimator.
    TenmtlVector,
    Local,
    Global,
    LrTucker,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Tenmtl => "tenmtl",
            Method::TenmtlVector => "tenmtl-vector",
            Method::Local => "local",
            Method::Global => "global",
            Method::LrTucker => "lr-tucker",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Method::Tenmtl,
            Method::TenmtlVector,
            Method::Local,
            Method::Global,
            Method::LrTucker,
        ]
        .into_iter()
        .find(|m| m.name() == s)
    }

    fn is_tuned(self) -> bool {
        matches!(self, Method::Tenmtl | Method::TenmtlVector)
    }
}

/// Candidate hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grid {
    /// Candidate `R_0`.
    pub task_ranks: Vec<usize>,
    /// Candidate feature rank, repeated over every feature mode.
    pub feature_ranks: Vec<usize>,
    /// Candidate `[T_0, T_1]`; empty ties `T` to `[R_0, R_feature]`.
    pub scalar_ranks: Vec<[usize; 2]>,
    /// Tied penalty candidates.
    pub lambdas: Vec<f64>,
    /// Candidate shared-column counts; `None` uses the default.
    pub shared: Vec<Option<usize>>,
    pub folds: usize,
    pub seed: u64,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            task_ranks: vec![2, 3, 4, 5],
            feature_ranks: vec![2, 3, 4, 5],
            scalar_ranks: Vec::new(),
            lambdas: vec![1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2, 0.1],
            shared: vec![None],
            folds: 5,
            seed: 0,
        }
    }
}

/// One point of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvTuple {
    pub tensor_ranks: Vec<usize>,
    pub scalar_ranks: [usize; 2],
    pub shared: Option<usize>,
    pub lambda: f64,
}

impl CvTuple {
    pub fn total_rank(&self) -> usize {
        self.tensor_ranks.iter().sum::<usize>() + self.scalar_ranks.iter().sum::<usize>()
    }
}

impl Grid {
    pub fn validate(&self) -> Result<(), TuningError> {
        if self.task_ranks.is_empty() || self.feature_ranks.is_empty() || self.lambdas.is_empty()
        {
            return Err(TuningError::InvalidGrid("candidate lists must be non-empty".into()));
        }
        if self.folds < 2 {
            return Err(TuningError::InvalidGrid(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        if self.lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(TuningError::InvalidGrid("penalties must be non-negative".into()));
        }
        Ok(())
    }

    /// All tuples for tasks with `modes` tensor feature modes, in grid order
    /// (task rank, feature rank, scalar ranks, shared count, λ).
    pub fn tuples(&self, modes: usize) -> Vec<CvTuple> {
        let shared = if self.shared.is_empty() {
            vec![None]
        } else {
            self.shared.clone()
        };
        let mut out = Vec::new();
        for &r0 in &self.task_ranks {
            for &rf in &self.feature_ranks {
                let mut tensor_ranks = vec![r0];
                tensor_ranks.extend(std::iter::repeat_n(rf, modes.max(1)));
                let scalar: Vec<[usize; 2]> = if self.scalar_ranks.is_empty() {
                    vec![[r0, rf]]
                } else {
                    self.scalar_ranks.clone()
                };
                for t in scalar {
                    for &q in &shared {
                        for &lambda in &self.lambdas {
                            out.push(CvTuple {
                                tensor_ranks: tensor_ranks.clone(),
                                scalar_ranks: t,
                                shared: q,
                                lambda,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Solver settings shared by every fit in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSettings {
    pub family: Family,
    pub epsilon: f64,
    pub max_iter: usize,
    pub ridge: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            family: Family::Gaussian,
            epsilon: 1e-5,
            max_iter: 50,
            ridge: DEFAULT_RIDGE,
        }
    }
}

fn tuple_hyper(tuple: &CvTuple, layout: &TaskLayout, s: &FitSettings) -> HyperParams {
    let tensor_ranks = match &layout.tensor_shape {
        Some(dims) => {
            let mut r = vec![tuple.tensor_ranks[0]];
            let rf = tuple.tensor_ranks.get(1).copied().unwrap_or(1);
            r.extend(std::iter::repeat_n(rf, dims.len()));
            r
        }
        None => Vec::new(),
    };
    HyperParams {
        tensor_ranks,
        scalar_ranks: tuple.scalar_ranks,
        shared: tuple.shared,
        penalties: Penalties::tied(tuple.lambda),
        epsilon: s.epsilon,
        max_iter: s.max_iter,
        family: s.family,
        init_ridge: s.ridge,
        ..HyperParams::default()
    }
}

/// Fits the joint estimator at one tuple and returns per-task models.
pub fn fit_tenmtl_models(
    tasks: &[TaskDataset],
    tuple: &CvTuple,
    settings: &FitSettings,
    vector_variant: bool,
) -> Result<Vec<PersonalizedModel>, FitError> {
    let layout = TaskLayout::of(tasks)?;
    if vector_variant {
        let vp = VectorParams {
            task_rank: tuple.tensor_ranks[0],
            feature_rank: tuple.tensor_ranks.get(1).copied().unwrap_or(1),
            lambda_g: tuple.lambda,
            lambda_u: tuple.lambda,
            family: settings.family,
            epsilon: settings.epsilon,
            max_iter: settings.max_iter,
            init_ridge: settings.ridge,
            ..VectorParams::default()
        };
        let (state, _) = fit_vector(tasks, &vp)?;
        return Ok(state.models());
    }
    let h = tuple_hyper(tuple, &layout, settings);
    let (state, _) = fit(tasks, &h)?;
    Ok(reconstruct_models(&state))
}

/// Whether a tuple's ranks fit the data dimensions.
pub fn tuple_is_feasible(tuple: &CvTuple, layout: &TaskLayout, vector_variant: bool) -> bool {
    if vector_variant {
        let r0 = tuple.tensor_ranks[0];
        let r1 = tuple.tensor_ranks.get(1).copied().unwrap_or(1);
        return r0 >= 1 && r0 <= layout.n_tasks && r1 >= 1 && r1 <= layout.n_scalar;
    }
    tuple_hyper(tuple, layout, &FitSettings::default())
        .resolve(layout)
        .is_ok()
}

/// Per-task fold labels: each task's sample order is shuffled and position
/// `k` goes to fold `k mod folds`.
pub fn fold_assignments(
    tasks: &[TaskDataset],
    folds: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, TuningError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    tasks
        .iter()
        .map(|t| {
            let n = t.n_samples();
            if n < folds {
                return Err(TuningError::TooFewSamples {
                    task: t.task_id.clone(),
                    samples: n,
                    folds,
                });
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut labels = vec![0; n];
            for (pos, &j) in order.iter().enumerate() {
                labels[j] = pos % folds;
            }
            Ok(labels)
        })
        .collect()
}

fn split(tasks: &[TaskDataset], labels: &[Vec<usize>], fold: usize) -> (Vec<TaskDataset>, Vec<TaskDataset>) {
    tasks
        .iter()
        .zip(labels)
        .map(|(t, l)| {
            let train: Vec<usize> = (0..t.n_samples()).filter(|&j| l[j] != fold).collect();
            let test: Vec<usize> = (0..t.n_samples()).filter(|&j| l[j] == fold).collect();
            (t.subset(&train), t.subset(&test))
        })
        .unzip()
}

/// Pooled held-out RMSE (Gaussian) or error rate (Bernoulli).
pub fn pooled_score(
    models: &[PersonalizedModel],
    tasks: &[TaskDataset],
    family: Family,
) -> Result<f64, FitError> {
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for (m, t) in models.iter().zip(tasks) {
        pred.extend(predict_task(m, t, family)?);
        truth.extend_from_slice(&t.y);
    }
    score(&pred, &truth, family)
}

fn score(pred: &[f64], truth: &[f64], family: Family) -> Result<f64, FitError> {
    let v = match family {
        Family::Gaussian => rmse(pred, truth),
        Family::Bernoulli => classification_accuracy(pred, truth, 0.5).map(|a| 1.0 - a),
    };
    v.map_err(|e| FitError::InvalidParameter(e.to_string()))
}

/// Average over tasks of each task's test RMSE (or error rate).
pub fn mean_task_score(
    models: &[PersonalizedModel],
    tasks: &[TaskDataset],
    family: Family,
) -> Result<f64, FitError> {
    let mut total = 0.0;
    for (m, t) in models.iter().zip(tasks) {
        total += score(&predict_task(m, t, family)?, &t.y, family)?;
    }
    Ok(total / tasks.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub tuples: Vec<CvTuple>,
    /// Mean held-out score per tuple; infinite when the tuple is infeasible
    /// or failed on some fold.
    pub scores: Vec<f64>,
    pub fold_scores: Vec<Vec<f64>>,
    pub selected: usize,
    pub fold_assignments: Vec<Vec<usize>>,
}

impl CvReport {
    pub fn selected_tuple(&self) -> &CvTuple {
        &self.tuples[self.selected]
    }
}

/// Index of the best tuple: lowest score, then smallest total rank, then
/// smallest λ, then first position.
pub fn select_best(tuples: &[CvTuple], scores: &[f64]) -> Option<usize> {
    (0..tuples.len())
        .filter(|&k| scores[k].is_finite())
        .min_by(|&a, &b| {
            scores[a]
                .total_cmp(&scores[b])
                .then(tuples[a].total_rank().cmp(&tuples[b].total_rank()))
                .then(tuples[a].lambda.total_cmp(&tuples[b].lambda))
                .then(a.cmp(&b))
        })
}

/// Cross-validates an arbitrary estimator over explicit tuples.
pub fn cross_validate<F>(
    tasks: &[TaskDataset],
    tuples: Vec<CvTuple>,
    folds: usize,
    seed: u64,
    family: Family,
    feasible: impl Fn(&CvTuple) -> bool + Sync,
    estimator: F,
) -> Result<CvReport, TuningError>
where
    F: Fn(&[TaskDataset], &CvTuple) -> Result<Vec<PersonalizedModel>, FitError> + Sync,
{
    if tuples.is_empty() {
        return Err(TuningError::InvalidGrid("no tuples".into()));
    }
    if folds < 2 {
        return Err(TuningError::InvalidGrid(format!("need at least 2 folds, got {folds}")));
    }
    TaskLayout::of(tasks)?;
    let labels = fold_assignments(tasks, folds, seed)?;
    let splits: Vec<_> = (0..folds).map(|f| split(tasks, &labels, f)).collect();
    let work: Vec<(usize, usize)> = (0..tuples.len())
        .flat_map(|k| (0..folds).map(move |f| (k, f)))
        .collect();
    let results: Vec<f64> = work
        .par_iter()
        .map(|&(k, f)| {
            if !feasible(&tuples[k]) {
                return f64::INFINITY;
            }
            let (train, test) = &splits[f];
            estimator(train, &tuples[k])
                .and_then(|m| pooled_score(&m, test, family))
                .ok()
                .filter(|v| v.is_finite())
                .unwrap_or(f64::INFINITY)
        })
        .collect();
    let fold_scores: Vec<Vec<f64>> = results.chunks(folds).map(<[f64]>::to_vec).collect();
    let scores: Vec<f64> = fold_scores
        .iter()
        .map(|s| s.iter().sum::<f64>() / folds as f64)
        .collect();
    let selected = select_best(&tuples, &scores).ok_or(TuningError::NoValidTuple)?;
    Ok(CvReport {
        tuples,
        scores,
        fold_scores,
        selected,
        fold_assignments: labels,
    })
}

/// Joint grid search for the Tucker estimator.
pub fn kfold_cv(
    tasks: &[TaskDataset],
    grid: &Grid,
    settings: &FitSettings,
) -> Result<CvReport, TuningError> {
    kfold_cv_method(tasks, grid, settings, Method::Tenmtl)
}

pub fn kfold_cv_method(
    tasks: &[TaskDataset],
    grid: &Grid,
    settings: &FitSettings,
    method: Method,
) -> Result<CvReport, TuningError> {
    grid.validate()?;
    let layout = TaskLayout::of(tasks)?;
    let modes = layout.tensor_shape.as_ref().map_or(1, Vec::len);
    let vector_variant = method == Method::TenmtlVector;
    match method {
        Method::Tenmtl | Method::TenmtlVector => cross_validate(
            tasks,
            grid.tuples(modes),
            grid.folds,
            grid.seed,
            settings.family,
            |t| tuple_is_feasible(t, &layout, vector_variant),
            |train, t| fit_tenmtl_models(train, t, settings, vector_variant),
        ),
        Method::LrTucker => {
            // λ plays no role; keep one tuple per rank combination
            let mut tuples = grid.tuples(modes);
            let first = tuples[0].lambda;
            tuples.retain(|t| t.lambda == first);
            cross_validate(
                tasks,
                tuples,
                grid.folds,
                grid.seed,
                settings.family,
                |t| tuple_is_feasible(t, &layout, false),
                |train, t| lr_tucker_models(train, t, settings),
            )
        }
        Method::Local | Method::Global => Err(TuningError::InvalidGrid(format!(
            "{} has no hyperparameters to tune",
            method.name()
        ))),
    }
}

fn lr_tucker_models(
    tasks: &[TaskDataset],
    tuple: &CvTuple,
    settings: &FitSettings,
) -> Result<Vec<PersonalizedModel>, FitError> {
    let layout = TaskLayout::of(tasks)?;
    let h = tuple_hyper(tuple, &layout, settings);
    let tensor = layout.tensor_shape.as_ref().map(|_| h.tensor_ranks.as_slice());
    let scalar = (layout.n_scalar > 0).then_some(h.scalar_ranks);
    fit_lr_tucker(tasks, settings.family, tensor, scalar, settings.ridge)
}

/// One cell of the experiment sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Setting {
    pub beta_u: f64,
    pub sigma_e: f64,
    pub sparsity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Base scenario; `beta_u`, `sigma_e` and `sparsity` are overridden per
    /// setting and the seed per replication.
    pub scenario: ScenarioConfig,
    pub settings: Vec<Setting>,
    pub methods: Vec<Method>,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub fit: FitSettings,
    /// Use these instead of cross-validation when set.
    #[serde(default)]
    pub fixed: Option<CvTuple>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), TuningError> {
        if self.settings.is_empty() || self.methods.is_empty() || self.replications == 0 {
            return Err(TuningError::InvalidGrid(
                "settings, methods and replications must be non-empty".into(),
            ));
        }
        if self.fixed.is_none() {
            self.grid.validate()?;
        }
        for s in &self.settings {
            self.setting_config(s, 0).validate()?;
        }
        Ok(())
    }

    pub fn setting_config(&self, s: &Setting, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            beta_u: s.beta_u,
            sigma_e: s.sigma_e,
            sparsity: s.sparsity,
            seed,
            ..self.scenario.clone()
        }
    }
}

/// Data seeds for each replication; identical across settings.
pub fn replication_seeds(master_seed: u64, replications: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    (0..replications).map(|_| rng.random()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub beta_u: f64,
    pub sigma_e: f64,
    pub s: f64,
    pub method: String,
    pub mean_rmse: f64,
    pub std_rmse: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub setting: usize,
    pub replication: usize,
    pub seed: u64,
    pub method: String,
    pub rmse: Option<f64>,
    pub error: Option<String>,
    pub selected: Option<CvTuple>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub rows: Vec<ResultRow>,
    pub replications: Vec<ReplicationRecord>,
}

fn run_replication(
    cfg: &ExperimentConfig,
    setting_index: usize,
    replication: usize,
    seed: u64,
) -> Vec<ReplicationRecord> {
    let setting = &cfg.settings[setting_index];
    let record = |method: Method, outcome: Result<f64, String>, selected: Option<CvTuple>| {
        ReplicationRecord {
            setting: setting_index,
            replication,
            seed,
            method: method.name().to_string(),
            rmse: outcome.as_ref().ok().copied(),
            error: outcome.err(),
            selected,
        }
    };
    let data = match generate_dataset(&cfg.setting_config(setting, seed)) {
        Ok(d) => d,
        Err(e) => {
            return cfg
                .methods
                .iter()
                .map(|&m| record(m, Err(e.to_string()), None))
                .collect()
        }
    };
    let (train, test) = (&data.train_tasks, &data.test_tasks);
    let family = cfg.fit.family;
    let grid = Grid {
        seed,
        ..cfg.grid.clone()
    };

    // rank selection shared by the tuned estimator and the smoother
    let mut selections: Vec<(Method, Result<CvTuple, String>)> = Vec::new();
    let mut select = |method: Method| -> Result<CvTuple, String> {
        if let Some(t) = &cfg.fixed {
            return Ok(t.clone());
        }
        if let Some((_, r)) = selections.iter().find(|(m, _)| *m == method) {
            return r.clone();
        }
        let r = kfold_cv_method(train, &grid, &cfg.fit, method)
            .map(|rep| rep.selected_tuple().clone())
            .map_err(|e| e.to_string());
        selections.push((method, r.clone()));
        r
    };

    let mut out = Vec::new();
    for &method in &cfg.methods {
        let mut chosen = None;
        let models: Result<Vec<PersonalizedModel>, String> = match method {
            Method::Local => fit_local(train, family, cfg.fit.ridge).map_err(|e| e.to_string()),
            Method::Global => {
                fit_global_per_task(train, family, cfg.fit.ridge).map_err(|e| e.to_string())
            }
            Method::Tenmtl | Method::TenmtlVector => select(method).and_then(|t| {
                chosen = Some(t.clone());
                fit_tenmtl_models(train, &t, &cfg.fit, method == Method::TenmtlVector)
                    .map_err(|e| e.to_string())
            }),
            Method::LrTucker => {
                let source = cfg
                    .methods
                    .iter()
                    .copied()
                    .find(|m| m.is_tuned())
                    .unwrap_or(Method::LrTucker);
                select(source).and_then(|t| {
                    chosen = Some(t.clone());
                    lr_tucker_models(train, &t, &cfg.fit).map_err(|e| e.to_string())
                })
            }
        };
        let outcome = models.and_then(|m| {
            mean_task_score(&m, test, family)
                .map_err(|e| e.to_string())
                .and_then(|v| {
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err("non-finite test score".to_string())
                    }
                })
        });
        out.push(record(method, outcome, chosen));
    }
    out
}

/// Replicated comparison of methods over settings.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResults, TuningError> {
    cfg.validate()?;
    let seeds = replication_seeds(cfg.master_seed, cfg.replications);
    let work: Vec<(usize, usize)> = (0..cfg.settings.len())
        .flat_map(|s| (0..cfg.replications).map(move |r| (s, r)))
        .collect();
    let records: Vec<ReplicationRecord> = work
        .par_iter()
        .map(|&(s, r)| run_replication(cfg, s, r, seeds[r]))
        .collect::<Vec<_>>()
        .concat();
    let mut rows = Vec::new();
    for (si, setting) in cfg.settings.iter().enumerate() {
        for &method in &cfg.methods {
            let values: Vec<f64> = records
                .iter()
                .filter(|r| r.setting == si && r.method == method.name())
                .filter_map(|r| r.rmse)
                .collect();
            let (mean, std) = mean_std(&values);
            rows.push(ResultRow {
                scenario: cfg.scenario.scenario.label().to_string(),
                beta_u: setting.beta_u,
                sigma_e: setting.sigma_e,
                s: setting.sparsity,
                method: method.name().to_string(),
                mean_rmse: mean,
                std_rmse: std,
                reps: values.len(),
            });
        }
    }
    Ok(ExperimentResults {
        rows,
        replications: records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tuple(r: &[usize], lambda: f64) -> CvTuple {
        CvTuple {
            tensor_ranks: r.to_vec(),
            scalar_ranks: [r[0], r[1]],
            shared: None,
            lambda,
        }
    }

    #[test]
    fn tie_break_prefers_small_rank_then_small_lambda_then_first() {
        let t = vec![tuple(&[3, 3], 0.1), tuple(&[2, 2], 0.5), tuple(&[2, 2], 0.1)];
        assert_eq!(select_best(&t, &[1.0, 1.0, 1.0]), Some(2));
        assert_eq!(select_best(&t, &[0.5, 1.0, 1.0]), Some(0));
        let dup = vec![tuple(&[2, 2], 0.1), tuple(&[2, 2], 0.1)];
        assert_eq!(select_best(&dup, &[1.0, 1.0]), Some(0));
        assert_eq!(select_best(&dup, &[f64::INFINITY; 2]), None);
    }

    #[test]
    fn grid_expands_feature_rank_over_modes() {
        let g = Grid {
            task_ranks: vec![2],
            feature_ranks: vec![3],
            lambdas: vec![0.1, 0.2],
            ..Grid::default()
        };
        let t = g.tuples(2);
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].tensor_ranks, vec![2, 3, 3]);
        assert_eq!(t[0].scalar_ranks, [2, 3]);
        assert_eq!(Grid::default().tuples(1).len(), 112);
    }

    #[test]
    fn replication_seeds_are_stable() {
        assert_eq!(replication_seeds(5, 3), replication_seeds(5, 3));
        assert_eq!(replication_seeds(5, 3)[..2], replication_seeds(5, 2)[..]);
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Tenmtl, Method::TenmtlVector, Method::Local, Method::Global, Method::LrTucker] {
            assert_eq!(Method::parse(m.name()), Some(m));
        }
        assert_eq!(Method::parse("svd-aso"), None);
    }
}

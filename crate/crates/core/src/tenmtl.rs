//! The multi-task Tucker estimator.
//!
//! For `N` tasks with scalar predictors `z_ij ∈ ℝ^p` and tensor predictors
//! `X_ij ∈ ℝ^{I_1×…×I_m}`, the linear predictor of sample `j` of task `i` is
//!
//! ```text
//! θ_ij = γ_iᵀ z_ij + ⟨B_i, X_ij⟩
//! ```
//!
//! where the stacked `B_i` equal `G ×_0 U_0 ×_1 U_1 … ×_m U_m` and the
//! stacked `γ_i` equal `H ×_0 V_0 ×_1 V_1`. The task factors share their
//! leading columns: `U_0 = [W_0 | F_0]`, `V_0 = [W_0 | D_0]`.
//!
//! [`fit`] initializes from a truncated HOSVD of local fits and then cycles
//! exact convex block updates in the order W0, F0, {U_d}, G, D0, V1, H.
//! Each block update is a GLM with fixed offsets solved by [`fit_glm`] from
//! the current value as warm start, so the objective never increases.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::glm::{fit_glm, Family, GlmError, GlmProblem};
use crate::tensor::{dot, hosvd, singular_values, DenseTensor, Matrix, TensorError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Glm(#[from] GlmError),
    #[error("invalid ranks: {0}")]
    InvalidRanks(String),
    #[error("inconsistent tasks: {0}")]
    InconsistentTasks(String),
    #[error("task {0} has no samples")]
    EmptyTask(String),
    #[error("invalid hyperparameter: {0}")]
    InvalidParameter(String),
}

/// One task's samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDataset {
    pub task_id: String,
    pub y: Vec<f64>,
    /// `n × p` scalar predictors; `p` may be zero.
    pub z: Matrix,
    /// One tensor per sample, or empty when the task has no tensor predictors.
    pub x: Vec<DenseTensor>,
}

impl TaskDataset {
    pub fn new(
        task_id: impl Into<String>,
        y: Vec<f64>,
        z: Matrix,
        x: Vec<DenseTensor>,
    ) -> Result<Self, FitError> {
        let t = Self {
            task_id: task_id.into(),
            y,
            z,
            x,
        };
        t.validate()?;
        Ok(t)
    }

    /// Task with scalar predictors only.
    pub fn vector(task_id: impl Into<String>, y: Vec<f64>, z: Matrix) -> Result<Self, FitError> {
        Self::new(task_id, y, z, Vec::new())
    }

    pub fn validate(&self) -> Result<(), FitError> {
        let n = self.y.len();
        if self.z.rows() != n {
            return Err(FitError::InconsistentTasks(format!(
                "task {}: {} responses but {} scalar predictor rows",
                self.task_id,
                n,
                self.z.rows()
            )));
        }
        if !self.x.is_empty() {
            if self.x.len() != n {
                return Err(FitError::InconsistentTasks(format!(
                    "task {}: {} responses but {} tensor predictors",
                    self.task_id,
                    n,
                    self.x.len()
                )));
            }
            let shape = self.x[0].shape();
            if self.x.iter().any(|t| t.shape() != shape) {
                return Err(FitError::InconsistentTasks(format!(
                    "task {}: tensor predictors differ in shape",
                    self.task_id
                )));
            }
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(FitError::InconsistentTasks(format!(
                "task {}: non-finite response",
                self.task_id
            )));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.y.len()
    }

    pub fn n_scalar(&self) -> usize {
        self.z.cols()
    }

    pub fn tensor_shape(&self) -> Option<&[usize]> {
        self.x.first().map(DenseTensor::shape)
    }

    /// Samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> TaskDataset {
        let p = self.n_scalar();
        let mut z = Vec::with_capacity(indices.len() * p);
        for &j in indices {
            z.extend_from_slice(self.z.row(j));
        }
        TaskDataset {
            task_id: self.task_id.clone(),
            y: indices.iter().map(|&j| self.y[j]).collect(),
            z: Matrix::new(indices.len(), p, z).expect("subset of a valid matrix"),
            x: if self.x.is_empty() {
                Vec::new()
            } else {
                indices.iter().map(|&j| self.x[j].clone()).collect()
            },
        }
    }

    /// `[z_ij | vec(X_ij)]`, the design of an unstructured local model.
    pub fn flat_design(&self) -> Matrix {
        let p = self.n_scalar();
        let t = self.x.first().map_or(0, DenseTensor::len);
        let mut data = Vec::with_capacity(self.n_samples() * (p + t));
        for j in 0..self.n_samples() {
            data.extend_from_slice(self.z.row(j));
            if let Some(x) = self.x.get(j) {
                data.extend_from_slice(x.data());
            }
        }
        Matrix::new(self.n_samples(), p + t, data).expect("consistent task")
    }
}

/// Shared shape of a task collection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskLayout {
    pub n_tasks: usize,
    pub n_scalar: usize,
    pub tensor_shape: Option<Vec<usize>>,
}

impl TaskLayout {
    pub fn of(tasks: &[TaskDataset]) -> Result<Self, FitError> {
        let first = tasks
            .first()
            .ok_or_else(|| FitError::InconsistentTasks("no tasks".into()))?;
        let layout = TaskLayout {
            n_tasks: tasks.len(),
            n_scalar: first.n_scalar(),
            tensor_shape: first.tensor_shape().map(<[usize]>::to_vec),
        };
        for t in tasks {
            t.validate()?;
            if t.n_samples() == 0 {
                return Err(FitError::EmptyTask(t.task_id.clone()));
            }
            if t.n_scalar() != layout.n_scalar
                || t.tensor_shape() != layout.tensor_shape.as_deref()
            {
                return Err(FitError::InconsistentTasks(format!(
                    "task {} does not match the shape of task {}",
                    t.task_id, first.task_id
                )));
            }
        }
        if layout.n_scalar == 0 && layout.tensor_shape.is_none() {
            return Err(FitError::InconsistentTasks("tasks have no predictors".into()));
        }
        Ok(layout)
    }

    pub fn flat_dim(&self) -> usize {
        self.n_scalar
            + self
                .tensor_shape
                .as_ref()
                .map_or(0, |s| s.iter().product::<usize>())
    }
}

/// Lasso weights on the cores and feature factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Penalties {
    pub g: f64,
    pub h: f64,
    pub u: f64,
    pub v: f64,
}

impl Penalties {
    pub fn tied(lambda: f64) -> Self {
        Self {
            g: lambda,
            h: lambda,
            u: lambda,
            v: lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperParams {
    /// `[R_0, R_1, …, R_m]`; ignored when tasks carry no tensor predictors.
    pub tensor_ranks: Vec<usize>,
    /// `[T_0, T_1]`; ignored when tasks carry no scalar predictors.
    pub scalar_ranks: [usize; 2],
    /// Number of task-factor columns shared by both sides; `None` picks
    /// `min(R_0, T_0) − 1` (0 when a side is absent).
    pub shared: Option<usize>,
    pub penalties: Penalties,
    pub epsilon: f64,
    pub max_iter: usize,
    pub family: Family,
    /// Ridge used by the local initialization fits when underdetermined.
    pub init_ridge: f64,
    pub glm_tol: f64,
    pub glm_max_iter: usize,
    /// Record the objective after every block update.
    pub track_blocks: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            tensor_ranks: Vec::new(),
            scalar_ranks: [1, 1],
            shared: None,
            penalties: Penalties::tied(0.0),
            epsilon: 1e-5,
            max_iter: 50,
            family: Family::Gaussian,
            init_ridge: 1e-6,
            glm_tol: 1e-7,
            glm_max_iter: 100,
            track_blocks: false,
        }
    }
}

/// Ranks resolved against a task layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedRanks {
    pub tensor: Option<Vec<usize>>,
    pub scalar: Option<[usize; 2]>,
    pub shared: usize,
}

impl HyperParams {
    pub fn resolve(&self, layout: &TaskLayout) -> Result<ResolvedRanks, FitError> {
        let n = layout.n_tasks;
        let tensor = match &layout.tensor_shape {
            None => None,
            Some(dims) => {
                let r = &self.tensor_ranks;
                if r.len() != dims.len() + 1 {
                    return Err(FitError::InvalidRanks(format!(
                        "{} tensor ranks for {} tensor modes plus the task mode",
                        r.len(),
                        dims.len()
                    )));
                }
                if r[0] == 0 || r[0] > n {
                    return Err(FitError::InvalidRanks(format!(
                        "R_0 = {} must lie in 1..={}",
                        r[0], n
                    )));
                }
                for (d, (&rd, &id)) in r[1..].iter().zip(dims).enumerate() {
                    if rd == 0 || rd > id {
                        return Err(FitError::InvalidRanks(format!(
                            "R_{} = {} must lie in 1..={}",
                            d + 1,
                            rd,
                            id
                        )));
                    }
                }
                Some(r.clone())
            }
        };
        let scalar = if layout.n_scalar == 0 {
            None
        } else {
            let [t0, t1] = self.scalar_ranks;
            if t0 == 0 || t0 > n || t1 == 0 || t1 > layout.n_scalar {
                return Err(FitError::InvalidRanks(format!(
                    "T = [{}, {}] must satisfy 1 ≤ T_0 ≤ {} and 1 ≤ T_1 ≤ {}",
                    t0, t1, n, layout.n_scalar
                )));
            }
            Some([t0, t1])
        };
        let limit = match (&tensor, &scalar) {
            (Some(r), Some(t)) => r[0].min(t[0]),
            _ => 0,
        };
        let shared = self.shared.unwrap_or(limit.saturating_sub(1));
        if shared > limit {
            return Err(FitError::InvalidRanks(format!(
                "Q_0 = {shared} exceeds min(R_0, T_0) = {limit}"
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(FitError::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        let p = self.penalties;
        if [p.g, p.h, p.u, p.v]
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(FitError::InvalidParameter(format!(
                "penalties must be non-negative: {p:?}"
            )));
        }
        Ok(ResolvedRanks {
            tensor,
            scalar,
            shared,
        })
    }
}

/// Tensor-side parameters: core `G` (`R_0 × … × R_m`), the distinct task
/// columns `F_0` and the feature factors `U_1..U_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSide {
    pub core: DenseTensor,
    pub f0: Matrix,
    pub factors: Vec<Matrix>,
}

/// Scalar-side parameters: core `H` (`T_0 × T_1`), distinct task columns
/// `D_0` and the feature factor `V_1` (`p × T_1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarSide {
    pub core: Matrix,
    pub d0: Matrix,
    pub v1: Matrix,
}

/// The complete learned model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuckerState {
    pub task_ids: Vec<String>,
    /// Shared task columns, `N × Q_0`.
    pub w0: Matrix,
    pub tensor: Option<TensorSide>,
    pub scalar: Option<ScalarSide>,
}

impl TuckerState {
    pub fn n_tasks(&self) -> usize {
        self.w0.rows()
    }

    pub fn n_shared(&self) -> usize {
        self.w0.cols()
    }

    /// `U_0 = [W_0 | F_0]`.
    pub fn u0(&self) -> Option<Matrix> {
        self.tensor
            .as_ref()
            .map(|t| self.w0.hcat(&t.f0).expect("row counts agree"))
    }

    /// `V_0 = [W_0 | D_0]`.
    pub fn v0(&self) -> Option<Matrix> {
        self.scalar
            .as_ref()
            .map(|s| self.w0.hcat(&s.d0).expect("row counts agree"))
    }

    fn u0_row(&self, i: usize) -> Vec<f64> {
        let t = self.tensor.as_ref().expect("tensor side present");
        [self.w0.row(i), t.f0.row(i)].concat()
    }

    fn v0_row(&self, i: usize) -> Vec<f64> {
        let s = self.scalar.as_ref().expect("scalar side present");
        [self.w0.row(i), s.d0.row(i)].concat()
    }

    pub fn is_finite(&self) -> bool {
        let mut all = self.w0.data().iter().all(|v| v.is_finite());
        if let Some(t) = &self.tensor {
            all &= t.core.data().iter().all(|v| v.is_finite());
            all &= t.f0.data().iter().all(|v| v.is_finite());
            all &= t.factors.iter().all(|u| u.data().iter().all(|v| v.is_finite()));
        }
        if let Some(s) = &self.scalar {
            all &= s.core.data().iter().all(|v| v.is_finite());
            all &= s.d0.data().iter().all(|v| v.is_finite());
            all &= s.v1.data().iter().all(|v| v.is_finite());
        }
        all
    }

    fn check_layout(&self, layout: &TaskLayout) -> Result<(), FitError> {
        if self.n_tasks() != layout.n_tasks {
            return Err(FitError::InconsistentTasks(format!(
                "state has {} tasks, data has {}",
                self.n_tasks(),
                layout.n_tasks
            )));
        }
        match (&self.tensor, &layout.tensor_shape) {
            (Some(t), Some(dims)) => {
                let ok = t.factors.len() == dims.len()
                    && t.factors.iter().zip(dims).all(|(u, &d)| u.rows() == d);
                if !ok {
                    return Err(FitError::InconsistentTasks(
                        "tensor factors do not match predictor shape".into(),
                    ));
                }
            }
            (None, None) => {}
            _ => {
                return Err(FitError::InconsistentTasks(
                    "tensor predictors and tensor parameters disagree".into(),
                ))
            }
        }
        match (&self.scalar, layout.n_scalar) {
            (Some(s), p) if s.v1.rows() == p && p > 0 => {}
            (None, 0) => {}
            _ => {
                return Err(FitError::InconsistentTasks(
                    "scalar predictors and scalar parameters disagree".into(),
                ))
            }
        }
        Ok(())
    }
}

/// Personalized parameters of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonalizedModel {
    pub task_id: String,
    pub b: Option<DenseTensor>,
    pub gamma: Vec<f64>,
}

impl PersonalizedModel {
    /// `γᵀz + ⟨B, x⟩`.
    pub fn linear_predictor(&self, z: &[f64], x: Option<&DenseTensor>) -> Result<f64, FitError> {
        if z.len() != self.gamma.len() {
            return Err(FitError::InconsistentTasks(format!(
                "{} scalar predictors for {} coefficients",
                z.len(),
                self.gamma.len()
            )));
        }
        let tensor_part = match (&self.b, x) {
            (Some(b), Some(x)) => b.inner_product(x)?,
            (None, None) => 0.0,
            (Some(_), None) => {
                return Err(FitError::InconsistentTasks("missing tensor predictor".into()))
            }
            (None, Some(_)) => {
                return Err(FitError::InconsistentTasks(
                    "model has no tensor coefficients".into(),
                ))
            }
        };
        Ok(dot(&self.gamma, z) + tensor_part)
    }

    /// Linear predictors for every sample of `task`.
    pub fn task_linear_predictors(&self, task: &TaskDataset) -> Result<Vec<f64>, FitError> {
        (0..task.n_samples())
            .map(|j| self.linear_predictor(task.z.row(j), task.x.get(j)))
            .collect()
    }
}

/// Mean response `b'(γᵀz + ⟨B, x⟩)`.
pub fn predict(
    model: &PersonalizedModel,
    z: &[f64],
    x: Option<&DenseTensor>,
    family: Family,
) -> Result<f64, FitError> {
    Ok(family.mean(model.linear_predictor(z, x)?))
}

/// Mean responses for every sample of `task`.
pub fn predict_task(
    model: &PersonalizedModel,
    task: &TaskDataset,
    family: Family,
) -> Result<Vec<f64>, FitError> {
    Ok(model
        .task_linear_predictors(task)?
        .into_iter()
        .map(|e| family.mean(e))
        .collect())
}

/// Objective values recorded during a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct FitTrace {
    /// `l^0` (after initialization) followed by one value per iteration.
    pub objectives: Vec<f64>,
    /// `(iteration, block, objective)` after every block update, when tracked.
    pub block_objectives: Vec<(usize, String, f64)>,
    pub iterations: usize,
    pub converged: bool,
    pub final_relative_change: f64,
    /// Number of block subproblems whose GLM solve hit its iteration limit.
    pub subproblem_failures: usize,
}

impl FitTrace {
    fn push_block(&mut self, track: bool, iteration: usize, block: &str, value: impl FnOnce() -> f64) {
        if track {
            self.block_objectives
                .push((iteration, block.to_string(), value()));
        }
    }
}

/// Per-sample contractions for one task under the current state.
struct TaskScores {
    /// `o_ij = G_(0) vec(X_ij ×_1 U_1ᵀ … ×_m U_mᵀ)`, length `R_0`.
    tensor: Vec<Vec<f64>>,
    /// `k_ij = H V_1ᵀ z_ij`, length `T_0`.
    scalar: Vec<Vec<f64>>,
}

fn project_features(x: &DenseTensor, factors: &[Matrix], skip: Option<usize>) -> DenseTensor {
    let mut out = x.clone();
    for (mode, u) in factors.iter().enumerate() {
        if Some(mode) == skip {
            continue;
        }
        out = out
            .mode_product(&u.transpose(), mode)
            .expect("factor rows match predictor shape");
    }
    out
}

fn core_rows(core: &DenseTensor) -> Matrix {
    let r0 = core.shape()[0];
    let rest = if r0 == 0 { 0 } else { core.len() / r0 };
    Matrix::new(r0, rest, core.data().to_vec()).expect("core reshape")
}

fn task_scores(state: &TuckerState, task: &TaskDataset) -> TaskScores {
    let n = task.n_samples();
    let tensor = match &state.tensor {
        Some(t) => {
            let g = core_rows(&t.core);
            task.x
                .iter()
                .map(|x| g.mul_vec(project_features(x, &t.factors, None).data()))
                .collect()
        }
        None => vec![Vec::new(); n],
    };
    let scalar = match &state.scalar {
        Some(s) => (0..n)
            .map(|j| s.core.mul_vec(&s.v1.vec_mul(task.z.row(j))))
            .collect(),
        None => vec![Vec::new(); n],
    };
    TaskScores { tensor, scalar }
}

/// Tensor and scalar contributions to the linear predictor of each sample.
fn task_parts(state: &TuckerState, i: usize, scores: &TaskScores) -> (Vec<f64>, Vec<f64>) {
    let u0 = state.tensor.as_ref().map(|_| state.u0_row(i));
    let v0 = state.scalar.as_ref().map(|_| state.v0_row(i));
    let tensor = scores
        .tensor
        .iter()
        .map(|o| u0.as_ref().map_or(0.0, |u| dot(u, o)))
        .collect();
    let scalar = scores
        .scalar
        .iter()
        .map(|k| v0.as_ref().map_or(0.0, |v| dot(v, k)))
        .collect();
    (tensor, scalar)
}

fn penalty_value(state: &TuckerState, p: &Penalties) -> f64 {
    let mut v = 0.0;
    if let Some(t) = &state.tensor {
        v += p.g * t.core.l1_norm();
        v += p.u * t.factors.iter().map(Matrix::l1_norm).sum::<f64>();
    }
    if let Some(s) = &state.scalar {
        v += p.h * s.core.l1_norm();
        v += p.v * s.v1.l1_norm();
    }
    v
}

/// Penalized negative log-likelihood over all tasks.
pub fn objective(
    state: &TuckerState,
    tasks: &[TaskDataset],
    h: &HyperParams,
) -> Result<f64, FitError> {
    let layout = TaskLayout::of(tasks)?;
    state.check_layout(&layout)?;
    Ok(objective_unchecked(state, tasks, h))
}

fn objective_unchecked(state: &TuckerState, tasks: &[TaskDataset], h: &HyperParams) -> f64 {
    let nll: f64 = tasks
        .par_iter()
        .enumerate()
        .map(|(i, task)| {
            let scores = task_scores(state, task);
            let (tp, sp) = task_parts(state, i, &scores);
            task.y
                .iter()
                .zip(tp.iter().zip(&sp))
                .map(|(&y, (a, b))| {
                    let eta = a + b;
                    -y * eta + h.family.cumulant(eta)
                })
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    nll + penalty_value(state, &h.penalties)
}

fn local_fit(
    task: &TaskDataset,
    family: Family,
    ridge: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, FitError> {
    let design = task.flat_design();
    let q = design.cols();
    let n = task.n_samples();
    let mut problem = GlmProblem::new(design, task.y.clone(), vec![0.0; n], 0.0, family)?;
    if n < q {
        problem = problem.with_ridge(ridge)?;
    }
    Ok(fit_glm(&problem, &vec![0.0; q], tol, max_iter)?.coefficients)
}

/// Unstructured per-task fits on `[z | vec(X)]`, ridge-stabilized when a task
/// has fewer samples than coefficients.
pub fn local_coefficients(
    tasks: &[TaskDataset],
    family: Family,
    ridge: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<Vec<f64>>, FitError> {
    tasks
        .par_iter()
        .map(|t| local_fit(t, family, ridge, tol, max_iter))
        .collect()
}

/// Splits stacked flat coefficients into the scalar matrix `Γ` (`N × p`) and
/// the tensor stack `B̃` (`N × I_1 × … × I_m`).
pub fn stack_coefficients(
    coefs: &[Vec<f64>],
    layout: &TaskLayout,
) -> (Option<Matrix>, Option<DenseTensor>) {
    let n = coefs.len();
    let p = layout.n_scalar;
    let gamma = (p > 0).then(|| {
        let data = coefs.iter().flat_map(|c| c[..p].iter().copied()).collect();
        Matrix::new(n, p, data).expect("stacked gamma")
    });
    let b = layout.tensor_shape.as_ref().map(|dims| {
        let mut shape = vec![n];
        shape.extend_from_slice(dims);
        let data = coefs.iter().flat_map(|c| c[p..].iter().copied()).collect();
        DenseTensor::new(shape, data).expect("stacked tensor")
    });
    (gamma, b)
}

/// Tucker initialization from local fits.
pub fn initialize(tasks: &[TaskDataset], h: &HyperParams) -> Result<TuckerState, FitError> {
    let layout = TaskLayout::of(tasks)?;
    let ranks = h.resolve(&layout)?;
    let coefs = local_coefficients(tasks, h.family, h.init_ridge, h.glm_tol, h.glm_max_iter)?;
    let (gamma, b) = stack_coefficients(&coefs, &layout);
    let q0 = ranks.shared;
    let n = layout.n_tasks;

    let scalar_init = match (&ranks.scalar, gamma) {
        (Some(t), Some(g)) => {
            let f = hosvd(&DenseTensor::from_matrix(&g), t)?;
            let core = Matrix::new(t[0], t[1], f.core.into_data())?;
            let mut factors = f.factors.into_iter();
            let v0 = factors.next().expect("two factors");
            let v1 = factors.next().expect("two factors");
            Some((core, v0, v1))
        }
        _ => None,
    };
    let tensor_init = match (&ranks.tensor, b) {
        (Some(r), Some(b)) => {
            let f = hosvd(&b, r)?;
            let mut factors = f.factors;
            let u0 = factors.remove(0);
            Some((f.core, u0, factors))
        }
        _ => None,
    };

    let w0 = match &scalar_init {
        Some((_, v0, _)) => v0.columns(0, q0),
        None => Matrix::zeros(n, 0),
    };
    let tensor = tensor_init.map(|(core, u0, factors)| TensorSide {
        f0: u0.columns(q0, u0.cols()),
        core,
        factors,
    });
    let scalar = scalar_init.map(|(core, v0, v1)| ScalarSide {
        d0: v0.columns(q0, v0.cols()),
        core,
        v1,
    });
    Ok(TuckerState {
        task_ids: tasks.iter().map(|t| t.task_id.clone()).collect(),
        w0,
        tensor,
        scalar,
    })
}

/// KKT tolerance scaled by the gradient magnitude at zero, so that blocks
/// with large designs are held to the same relative accuracy.
fn block_tolerance(problem: &GlmProblem, tol: f64) -> f64 {
    let scale = problem
        .gradient(&vec![0.0; problem.n_coefficients()])
        .iter()
        .fold(1.0f64, |acc, g| acc.max(g.abs()));
    tol * scale
}

fn solve_block(
    design: Vec<f64>,
    q: usize,
    y: Vec<f64>,
    offset: Vec<f64>,
    l1: f64,
    init: &[f64],
    h: &HyperParams,
    failures: &mut usize,
) -> Result<Vec<f64>, FitError> {
    let rows = y.len();
    let problem = GlmProblem::new(Matrix::new(rows, q, design)?, y, offset, l1, h.family)?;
    let sol = fit_glm(&problem, init, block_tolerance(&problem, h.glm_tol), h.glm_max_iter)?;
    if !sol.converged {
        *failures += 1;
    }
    Ok(sol.coefficients)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum RowBlock {
    Shared,
    TensorOnly,
    ScalarOnly,
}

fn row_update(
    block: RowBlock,
    i: usize,
    state: &TuckerState,
    task: &TaskDataset,
    scores: &TaskScores,
    h: &HyperParams,
    failures: &mut usize,
) -> Result<Vec<f64>, FitError> {
    let q0 = state.n_shared();
    let (width, init) = match block {
        RowBlock::Shared => (q0, state.w0.row(i).to_vec()),
        RowBlock::TensorOnly => match &state.tensor {
            Some(t) => (t.f0.cols(), t.f0.row(i).to_vec()),
            None => (0, Vec::new()),
        },
        RowBlock::ScalarOnly => match &state.scalar {
            Some(s) => (s.d0.cols(), s.d0.row(i).to_vec()),
            None => (0, Vec::new()),
        },
    };
    if width == 0 {
        return Ok(init);
    }
    let u0 = state.tensor.as_ref().map(|_| state.u0_row(i));
    let v0 = state.scalar.as_ref().map(|_| state.v0_row(i));
    let n = task.n_samples();
    let mut design = Vec::with_capacity(n * width);
    let mut offset = Vec::with_capacity(n);
    for j in 0..n {
        let o = &scores.tensor[j];
        let k = &scores.scalar[j];
        // split linear predictor: shared part + distinct parts
        let (mut w_part, mut f_part, mut d_part) = (vec![0.0; q0], 0.0, 0.0);
        if let Some(u) = &u0 {
            for c in 0..q0 {
                w_part[c] += o[c];
            }
            f_part = dot(&u[q0..], &o[q0..]);
        }
        if let Some(v) = &v0 {
            for c in 0..q0 {
                w_part[c] += k[c];
            }
            d_part = dot(&v[q0..], &k[q0..]);
        }
        match block {
            RowBlock::Shared => {
                design.extend_from_slice(&w_part);
                offset.push(f_part + d_part);
            }
            RowBlock::TensorOnly => {
                design.extend_from_slice(&o[q0..]);
                offset.push(dot(state.w0.row(i), &w_part) + d_part);
            }
            RowBlock::ScalarOnly => {
                design.extend_from_slice(&k[q0..]);
                offset.push(dot(state.w0.row(i), &w_part) + f_part);
            }
        }
    }
    solve_block(design, width, task.y.clone(), offset, 0.0, &init, h, failures)
}

fn update_rows(
    block: RowBlock,
    state: &mut TuckerState,
    tasks: &[TaskDataset],
    scores: &[TaskScores],
    h: &HyperParams,
    failures: &mut usize,
) -> Result<(), FitError> {
    let results: Vec<Result<(Vec<f64>, usize), FitError>> = tasks
        .par_iter()
        .enumerate()
        .map(|(i, task)| {
            let mut f = 0;
            row_update(block, i, state, task, &scores[i], h, &mut f).map(|r| (r, f))
        })
        .collect();
    for (i, r) in results.into_iter().enumerate() {
        let (row, f) = r?;
        *failures += f;
        let target = match block {
            RowBlock::Shared => &mut state.w0,
            RowBlock::TensorOnly => match &mut state.tensor {
                Some(t) => &mut t.f0,
                None => continue,
            },
            RowBlock::ScalarOnly => match &mut state.scalar {
                Some(s) => &mut s.d0,
                None => continue,
            },
        };
        if target.cols() > 0 {
            target.row_mut(i).copy_from_slice(&row);
        }
    }
    Ok(())
}

fn all_scores(state: &TuckerState, tasks: &[TaskDataset]) -> Vec<TaskScores> {
    tasks.par_iter().map(|t| task_scores(state, t)).collect()
}

/// Solves for row `i` of `W_0` with every other block fixed.
pub fn update_w0_row(
    i: usize,
    state: &TuckerState,
    task: &TaskDataset,
    h: &HyperParams,
) -> Result<Vec<f64>, FitError> {
    let scores = task_scores(state, task);
    row_update(RowBlock::Shared, i, state, task, &scores, h, &mut 0)
}

/// Solves for row `i` of `F_0` with every other block fixed.
pub fn update_f0_row(
    i: usize,
    state: &TuckerState,
    task: &TaskDataset,
    h: &HyperParams,
) -> Result<Vec<f64>, FitError> {
    let scores = task_scores(state, task);
    row_update(RowBlock::TensorOnly, i, state, task, &scores, h, &mut 0)
}

/// Solves for row `i` of `D_0` with every other block fixed.
pub fn update_d0_row(
    i: usize,
    state: &TuckerState,
    task: &TaskDataset,
    h: &HyperParams,
) -> Result<Vec<f64>, FitError> {
    let scores = task_scores(state, task);
    row_update(RowBlock::ScalarOnly, i, state, task, &scores, h, &mut 0)
}

fn scalar_offsets(state: &TuckerState, tasks: &[TaskDataset]) -> Vec<Vec<f64>> {
    tasks
        .par_iter()
        .enumerate()
        .map(|(i, task)| match &state.scalar {
            Some(s) => {
                let v0 = state.v0_row(i);
                let gamma = s.v1.mul_vec(&s.core.vec_mul(&v0));
                (0..task.n_samples())
                    .map(|j| dot(&gamma, task.z.row(j)))
                    .collect()
            }
            None => vec![0.0; task.n_samples()],
        })
        .collect()
}

fn tensor_offsets(state: &TuckerState, tasks: &[TaskDataset]) -> Vec<Vec<f64>> {
    tasks
        .par_iter()
        .enumerate()
        .map(|(i, task)| {
            let scores = task_scores(state, task);
            task_parts(state, i, &scores).0
        })
        .collect()
}

fn stacked_response(tasks: &[TaskDataset]) -> Vec<f64> {
    tasks.iter().flat_map(|t| t.y.iter().copied()).collect()
}

/// Solves for the feature factor `U_d` (`1 ≤ d ≤ m`) under the `λ_u` lasso.
pub fn update_ud(
    d: usize,
    state: &TuckerState,
    tasks: &[TaskDataset],
    h: &HyperParams,
) -> Result<Matrix, FitError> {
    update_ud_counted(d, state, tasks, h, &mut 0)
}

fn update_ud_counted(
    d: usize,
    state: &TuckerState,
    tasks: &[TaskDataset],
    h: &HyperParams,
    failures: &mut usize,
) -> Result<Matrix, FitError> {
    let t = state
        .tensor
        .as_ref()
        .ok_or_else(|| FitError::InvalidParameter("no tensor side".into()))?;
    if d == 0 || d > t.factors.len() {
        return Err(FitError::InvalidParameter(format!(
            "feature mode {d} out of range 1..={}",
            t.factors.len()
        )));
    }
    let mode = d - 1;
    let ud = &t.factors[mode];
    let (rows, rank) = (ud.rows(), ud.cols());
    let q = rows * rank;
    let offsets = scalar_offsets(state, tasks);
    let designs: Vec<Vec<f64>> = tasks
        .par_iter()
        .enumerate()
        .map(|(i, task)| {
            let u0 = Matrix::new(1, t.core.shape()[0], state.u0_row(i)).expect("row");
            let weighted = t.core.mode_product(&u0, 0).expect("core mode 0");
            let mut cshape = weighted.shape()[1..].to_vec();
            if cshape.is_empty() {
                cshape.push(1);
            }
            let weighted = weighted.reshape(cshape).expect("drop task mode");
            let c_unf = weighted.matricize(mode).expect("mode in range");
            let mut out = Vec::with_capacity(task.n_samples() * q);
            for x in &task.x {
                let y = project_features(x, &t.factors, Some(mode));
                let y_unf = y.matricize(mode).expect("mode in range");
                // S = Y_(d) C_(d)ᵀ, flattened row-major to match U_d
                let s = y_unf.matmul(&c_unf.transpose()).expect("unfoldings agree");
                out.extend_from_slice(s.data());
            }
            out
        })
        .collect();
    let design: Vec<f64> = designs.concat();
    let offset: Vec<f64> = offsets.concat();
    let coef = solve_block(
        design,
        q,
        stacked_response(tasks),
        offset,
        h.penalties.u,
        ud.data(),
        h,
        failures,
    )?;
    Ok(Matrix::new(rows, rank, coef)?)
}

/// Solves for the tensor core `G` under the `λ_g` lasso.
pub fn update_core_g(
    state: &TuckerState,
    tasks: &[TaskDataset],
    h: &HyperParams,
) -> Result<DenseTensor, FitError> {
    update_core_g_counted(state, tasks, h, &mut 0)
}

fn update_core_g_counted(
    state: &TuckerState,
    tasks: &[TaskDataset],
    h: &HyperParams,
    failures: &mut usize,
) -> Result<DenseTensor, FitError> {
    let t = state
        .tensor
        .as_ref()
        .ok_or_else(|| FitError::InvalidParameter("no tensor side".into()))?;
    let q = t.core.len();
    let offsets = scalar_offsets(state, tasks);
    let designs: Vec<Vec<f64>> = tasks
        .par_iter()
        .enumerate()
        .map(|(i, task)| {
            let u0 = state.u0_row(i);
            let mut out = Vec::with_capacity(task.n_samples() * q);
            for x in &task.x {
                let proj = project_features(x, &t.factors, None);
                for &a in &u0 {
                    out.extend(proj.data().iter().map(|p| a * p));
                }
            }
            out
        })
        .collect();
    let coef = solve_block(
        designs.concat(),
        q,
        stacked_response(tasks),
        offsets.concat(),
        h.penalties.g,
        t.core.data(),
        h,
        failures,
    )?;
    Ok(DenseTensor::new(t.core.shape().to_vec(), coef)?)
}

/// Solves for the scalar feature factor `V_1` under the `λ_v` lasso.
pub fn update_v1(
    state: &TuckerState,
    tasks: &[TaskDataset],
    h: &HyperParams,
) -> Result<Matrix, FitError> {
    update_v1_counted(state, tasks, h, &mut 0)
}

fn update_v1_counted(
    state: &TuckerState,
    tasks: &[TaskDataset],
    h: &HyperParams,
    failures: &mut usize,
) -> Result<Matrix, FitError> {
    let s = state
        .scalar
        .as_ref()
        .ok_or_else(|| FitError::InvalidParameter("no scalar predictors".into()))?;
    let (p, t1) = (s.v1.rows(), s.v1.cols());
    let q = p * t1;
    let offsets = tensor_offsets(state, tasks);
    let mut design = Vec::new();
    for (i, task) in tasks.iter().enumerate() {
        let kappa = s.core.vec_mul(&state.v0_row(i));
        for j in 0..task.n_samples() {
            for &za in task.z.row(j) {
                design.extend(kappa.iter().map(|k| za * k));
            }
        }
    }
    let coef = solve_block(
        design,
        q,
        stacked_response(tasks),
        offsets.concat(),
        h.penalties.v,
        s.v1.data(),
        h,
        failures,
    )?;
    Ok(Matrix::new(p, t1, coef)?)
}

/// Solves for the scalar core `H` under the `λ_h` lasso.
pub fn update_core_h(
    state: &TuckerState,
    tasks: &[TaskDataset],
    h: &HyperParams,
) -> Result<Matrix, FitError> {
    update_core_h_counted(state, tasks, h, &mut 0)
}

fn update_core_h_counted(
    state: &TuckerState,
    tasks: &[TaskDataset],
    h: &HyperParams,
    failures: &mut usize,
) -> Result<Matrix, FitError> {
    let s = state
        .scalar
        .as_ref()
        .ok_or_else(|| FitError::InvalidParameter("no scalar predictors".into()))?;
    let (t0, t1) = (s.core.rows(), s.core.cols());
    let offsets = tensor_offsets(state, tasks);
    let mut design = Vec::new();
    for (i, task) in tasks.iter().enumerate() {
        let v0 = state.v0_row(i);
        for j in 0..task.n_samples() {
            let b = s.v1.vec_mul(task.z.row(j));
            for &a in &v0 {
                design.extend(b.iter().map(|bb| a * bb));
            }
        }
    }
    let coef = solve_block(
        design,
        t0 * t1,
        stacked_response(tasks),
        offsets.concat(),
        h.penalties.h,
        s.core.data(),
        h,
        failures,
    )?;
    Ok(Matrix::new(t0, t1, coef)?)
}

/// One full pass over the seven blocks in their fixed order.
fn sweep(
    state: &mut TuckerState,
    tasks: &[TaskDataset],
    h: &HyperParams,
    iteration: usize,
    trace: &mut FitTrace,
) -> Result<(), FitError> {
    let track = h.track_blocks;
    let mut failures = 0;

    let scores = all_scores(state, tasks);
    update_rows(RowBlock::Shared, state, tasks, &scores, h, &mut failures)?;
    trace.push_block(track, iteration, "W0", || objective_unchecked(state, tasks, h));
    update_rows(RowBlock::TensorOnly, state, tasks, &scores, h, &mut failures)?;
    trace.push_block(track, iteration, "F0", || objective_unchecked(state, tasks, h));

    let m = state.tensor.as_ref().map_or(0, |t| t.factors.len());
    for d in 1..=m {
        let ud = update_ud_counted(d, state, tasks, h, &mut failures)?;
        state.tensor.as_mut().expect("tensor side").factors[d - 1] = ud;
        trace.push_block(track, iteration, &format!("U{d}"), || {
            objective_unchecked(state, tasks, h)
        });
    }
    if state.tensor.is_some() {
        let g = update_core_g_counted(state, tasks, h, &mut failures)?;
        state.tensor.as_mut().expect("tensor side").core = g;
        trace.push_block(track, iteration, "G", || objective_unchecked(state, tasks, h));
    }

    if state.scalar.is_some() {
        let scores = all_scores(state, tasks);
        update_rows(RowBlock::ScalarOnly, state, tasks, &scores, h, &mut failures)?;
        trace.push_block(track, iteration, "D0", || objective_unchecked(state, tasks, h));
        let v1 = update_v1_counted(state, tasks, h, &mut failures)?;
        state.scalar.as_mut().expect("scalar side").v1 = v1;
        trace.push_block(track, iteration, "V1", || objective_unchecked(state, tasks, h));
        let core = update_core_h_counted(state, tasks, h, &mut failures)?;
        state.scalar.as_mut().expect("scalar side").core = core;
        trace.push_block(track, iteration, "H", || objective_unchecked(state, tasks, h));
    }
    trace.subproblem_failures += failures;
    Ok(())
}

/// Relative objective change with an absolute value and a floor on the
/// denominator.
pub fn relative_change(current: f64, previous: f64) -> f64 {
    (current - previous).abs() / previous.abs().max(1e-12)
}

/// Initializes and runs block coordinate descent to convergence.
pub fn fit(tasks: &[TaskDataset], h: &HyperParams) -> Result<(TuckerState, FitTrace), FitError> {
    let state = initialize(tasks, h)?;
    fit_from(state, tasks, h)
}

/// Block coordinate descent from a given state.
pub fn fit_from(
    mut state: TuckerState,
    tasks: &[TaskDataset],
    h: &HyperParams,
) -> Result<(TuckerState, FitTrace), FitError> {
    let layout = TaskLayout::of(tasks)?;
    h.resolve(&layout)?;
    state.check_layout(&layout)?;
    let mut trace = FitTrace::default();
    let mut previous = objective_unchecked(&state, tasks, h);
    trace.objectives.push(previous);
    trace.final_relative_change = f64::INFINITY;
    for iteration in 1..=h.max_iter {
        sweep(&mut state, tasks, h, iteration, &mut trace)?;
        let current = objective_unchecked(&state, tasks, h);
        trace.objectives.push(current);
        trace.iterations = iteration;
        let change = relative_change(current, previous);
        trace.final_relative_change = change;
        previous = current;
        if change < h.epsilon {
            trace.converged = true;
            break;
        }
    }
    Ok((state, trace))
}

/// Per-task parameters `B_i = G ×_0 u0_i ×_1 U_1 …` and `γ_i = H ×_0 v0_i ×_1 V_1`.
pub fn reconstruct_models(state: &TuckerState) -> Vec<PersonalizedModel> {
    let n = state.n_tasks();
    (0..n)
        .map(|i| {
            let b = state.tensor.as_ref().map(|t| {
                let u0 = Matrix::new(1, t.core.shape()[0], state.u0_row(i)).expect("row");
                let mut out = t.core.mode_product(&u0, 0).expect("core mode 0");
                for (d, u) in t.factors.iter().enumerate() {
                    out = out.mode_product(u, d + 1).expect("factor shape");
                }
                let shape = out.shape()[1..].to_vec();
                out.reshape(shape).expect("drop task mode")
            });
            let gamma = match &state.scalar {
                Some(s) => s.v1.mul_vec(&s.core.vec_mul(&state.v0_row(i))),
                None => Vec::new(),
            };
            PersonalizedModel {
                task_id: state
                    .task_ids
                    .get(i)
                    .cloned()
                    .unwrap_or_else(|| i.to_string()),
                b,
                gamma,
            }
        })
        .collect()
}

/// Settings of the vector-only estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VectorParams {
    pub task_rank: usize,
    pub feature_rank: usize,
    pub lambda_g: f64,
    pub lambda_u: f64,
    pub family: Family,
    pub epsilon: f64,
    pub max_iter: usize,
    pub init_ridge: f64,
    pub glm_tol: f64,
    pub glm_max_iter: usize,
}

impl Default for VectorParams {
    fn default() -> Self {
        Self {
            task_rank: 1,
            feature_rank: 1,
            lambda_g: 0.0,
            lambda_u: 0.0,
            family: Family::Gaussian,
            epsilon: 1e-5,
            max_iter: 50,
            init_ridge: 1e-6,
            glm_tol: 1e-7,
            glm_max_iter: 100,
        }
    }
}

/// Vector-only model `β_iᵀ = u0_i G U_1ᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorState {
    pub task_ids: Vec<String>,
    /// `N × R_0`.
    pub u0: Matrix,
    /// `R_0 × R_1`.
    pub core: Matrix,
    /// `d × R_1`.
    pub u1: Matrix,
}

impl VectorState {
    /// Stacked coefficients, `N × d`.
    pub fn coefficients(&self) -> Matrix {
        self.u0
            .matmul(&self.core)
            .and_then(|m| m.matmul(&self.u1.transpose()))
            .expect("factor shapes agree")
    }

    pub fn models(&self) -> Vec<PersonalizedModel> {
        let b = self.coefficients();
        (0..b.rows())
            .map(|i| PersonalizedModel {
                task_id: self.task_ids.get(i).cloned().unwrap_or_else(|| i.to_string()),
                b: None,
                gamma: b.row(i).to_vec(),
            })
            .collect()
    }

    fn objective(&self, tasks: &[TaskDataset], vp: &VectorParams) -> f64 {
        let b = self.coefficients();
        let nll: f64 = tasks
            .iter()
            .enumerate()
            .map(|(i, t)| {
                (0..t.n_samples())
                    .map(|j| {
                        let eta = dot(b.row(i), t.z.row(j));
                        -t.y[j] * eta + vp.family.cumulant(eta)
                    })
                    .sum::<f64>()
            })
            .sum();
        nll + vp.lambda_g * self.core.l1_norm() + vp.lambda_u * self.u1.l1_norm()
    }
}

/// Alternating estimator for tasks that carry only scalar predictors.
pub fn fit_vector(
    tasks: &[TaskDataset],
    vp: &VectorParams,
) -> Result<(VectorState, FitTrace), FitError> {
    let layout = TaskLayout::of(tasks)?;
    if layout.tensor_shape.is_some() {
        return Err(FitError::InconsistentTasks(
            "vector estimator needs scalar predictors only".into(),
        ));
    }
    let (n, d) = (layout.n_tasks, layout.n_scalar);
    let (r0, r1) = (vp.task_rank, vp.feature_rank);
    if r0 == 0 || r0 > n || r1 == 0 || r1 > d {
        return Err(FitError::InvalidRanks(format!(
            "R = [{r0}, {r1}] must satisfy 1 ≤ R_0 ≤ {n} and 1 ≤ R_1 ≤ {d}"
        )));
    }
    if !(vp.epsilon > 0.0) || vp.lambda_g < 0.0 || vp.lambda_u < 0.0 {
        return Err(FitError::InvalidParameter(
            "epsilon must be positive and penalties non-negative".into(),
        ));
    }
    let coefs = local_coefficients(tasks, vp.family, vp.init_ridge, vp.glm_tol, vp.glm_max_iter)?;
    let stacked = Matrix::new(n, d, coefs.concat())?;
    let f = hosvd(&DenseTensor::from_matrix(&stacked), &[r0, r1])?;
    let mut factors = f.factors.into_iter();
    let mut state = VectorState {
        task_ids: tasks.iter().map(|t| t.task_id.clone()).collect(),
        u0: factors.next().expect("task factor"),
        core: Matrix::new(r0, r1, f.core.into_data())?,
        u1: factors.next().expect("feature factor"),
    };

    let mut trace = FitTrace::default();
    let mut previous = state.objective(tasks, vp);
    trace.objectives.push(previous);
    trace.final_relative_change = f64::INFINITY;
    let total: usize = tasks.iter().map(TaskDataset::n_samples).sum();
    let y: Vec<f64> = stacked_response(tasks);
    let glm = |design: Vec<f64>, q: usize, y: Vec<f64>, l1: f64, init: &[f64], fails: &mut usize| {
        let rows = y.len();
        let p = GlmProblem::new(Matrix::new(rows, q, design)?, y, vec![0.0; rows], l1, vp.family)?;
        let sol = fit_glm(&p, init, block_tolerance(&p, vp.glm_tol), vp.glm_max_iter)?;
        if !sol.converged {
            *fails += 1;
        }
        Ok::<_, FitError>(sol.coefficients)
    };

    for iteration in 1..=vp.max_iter {
        let mut failures = 0;
        // task rows: design k_ij = G U_1ᵀ x_ij
        let gu = state.core.matmul(&state.u1.transpose())?;
        let rows: Vec<Result<(Vec<f64>, usize), FitError>> = tasks
            .par_iter()
            .enumerate()
            .map(|(i, t)| {
                let mut design = Vec::with_capacity(t.n_samples() * r0);
                for j in 0..t.n_samples() {
                    design.extend(gu.mul_vec(t.z.row(j)));
                }
                let mut f = 0;
                glm(design, r0, t.y.clone(), 0.0, state.u0.row(i), &mut f).map(|r| (r, f))
            })
            .collect();
        for (i, r) in rows.into_iter().enumerate() {
            let (row, f) = r?;
            failures += f;
            state.u0.row_mut(i).copy_from_slice(&row);
        }

        // U_1: design x_ij ⊗ t_i with t_i = u0_i G, coefficients vec of U_1 row-major
        let mut design = Vec::with_capacity(total * d * r1);
        for (i, t) in tasks.iter().enumerate() {
            let ti = state.core.vec_mul(state.u0.row(i));
            for j in 0..t.n_samples() {
                for &xa in t.z.row(j) {
                    design.extend(ti.iter().map(|v| xa * v));
                }
            }
        }
        let u1 = glm(design, d * r1, y.clone(), vp.lambda_u, state.u1.data(), &mut failures)?;
        state.u1 = Matrix::new(d, r1, u1)?;

        // G: design u0_i ⊗ m_ij with m_ij = U_1ᵀ x_ij
        let mut design = Vec::with_capacity(total * r0 * r1);
        for (i, t) in tasks.iter().enumerate() {
            let u0 = state.u0.row(i);
            for j in 0..t.n_samples() {
                let mv = state.u1.vec_mul(t.z.row(j));
                for &a in u0 {
                    design.extend(mv.iter().map(|v| a * v));
                }
            }
        }
        let g = glm(design, r0 * r1, y.clone(), vp.lambda_g, state.core.data(), &mut failures)?;
        state.core = Matrix::new(r0, r1, g)?;

        trace.subproblem_failures += failures;
        let current = state.objective(tasks, vp);
        trace.objectives.push(current);
        trace.iterations = iteration;
        let change = relative_change(current, previous);
        trace.final_relative_change = change;
        previous = current;
        if change < vp.epsilon {
            trace.converged = true;
            break;
        }
    }
    Ok((state, trace))
}

/// Numerical rank threshold relative to the largest singular value.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Covariance `LᵀL` (`p × p`) of `β_i = u0_i L` with `L = G U_1ᵀ` when the
/// task factors are standard normal, and its numerical rank.
pub fn implied_covariance(core: &Matrix, feature_factor: &Matrix) -> Result<(Matrix, usize), FitError> {
    if core.cols() != feature_factor.cols() {
        return Err(FitError::InconsistentTasks(format!(
            "core has {} columns, feature factor {}",
            core.cols(),
            feature_factor.cols()
        )));
    }
    let p = feature_factor.rows();
    if core.rows() == 0 {
        return Ok((Matrix::zeros(p, p), 0));
    }
    let l = core.matmul(&feature_factor.transpose())?;
    let cov = l.transpose().matmul(&l)?;
    Ok((cov.clone(), numerical_rank(&cov)))
}

/// Number of singular values above `RANK_TOLERANCE · σ_max`.
pub fn numerical_rank(m: &Matrix) -> usize {
    let s = singular_values(m);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > RANK_TOLERANCE * smax).count()
}

impl VectorState {
    pub fn implied_covariance(&self) -> Result<(Matrix, usize), FitError> {
        implied_covariance(&self.core, &self.u1)
    }
}

impl TuckerState {
    /// Covariance diagnostic for a single tensor mode (`m = 1`).
    pub fn implied_covariance(&self) -> Result<(Matrix, usize), FitError> {
        let t = self
            .tensor
            .as_ref()
            .filter(|t| t.factors.len() == 1)
            .ok_or_else(|| {
                FitError::InvalidParameter("covariance diagnostic needs one tensor mode".into())
            })?;
        let core = Matrix::new(t.core.shape()[0], t.core.shape()[1], t.core.data().to_vec())?;
        implied_covariance(&core, &t.factors[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normal(rng: &mut ChaCha8Rng) -> f64 {
        rng.sample(StandardNormal)
    }

    fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::new(r, c, (0..r * c).map(|_| normal(rng)).collect()).unwrap()
    }

    fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> DenseTensor {
        let n = shape.iter().product();
        DenseTensor::new(shape.to_vec(), (0..n).map(|_| normal(rng)).collect()).unwrap()
    }

    /// Tasks with `p` scalar predictors and `dims`-shaped tensors, Gaussian
    /// responses from random dense coefficients.
    fn mixed_tasks(rng: &mut ChaCha8Rng, n_tasks: usize, n: usize, p: usize, dims: &[usize]) -> Vec<TaskDataset> {
        (0..n_tasks)
            .map(|i| {
                let gamma: Vec<f64> = (0..p).map(|_| normal(rng)).collect();
                let b = (!dims.is_empty()).then(|| rand_tensor(rng, dims));
                let z = rand_matrix(rng, n, p);
                let x: Vec<DenseTensor> = match &b {
                    Some(_) => (0..n).map(|_| rand_tensor(rng, dims)).collect(),
                    None => Vec::new(),
                };
                let y = (0..n)
                    .map(|j| {
                        let mut v = dot(&gamma, z.row(j)) + 0.3 * normal(rng);
                        if let Some(b) = &b {
                            v += b.inner_product(&x[j]).unwrap();
                        }
                        v
                    })
                    .collect();
                TaskDataset::new(i.to_string(), y, z, x).unwrap()
            })
            .collect()
    }

    fn random_state(rng: &mut ChaCha8Rng, n: usize, q0: usize, r: &[usize], dims: &[usize], t: [usize; 2], p: usize) -> TuckerState {
        TuckerState {
            task_ids: (0..n).map(|i| i.to_string()).collect(),
            w0: rand_matrix(rng, n, q0),
            tensor: Some(TensorSide {
                core: rand_tensor(rng, r),
                f0: rand_matrix(rng, n, r[0] - q0),
                factors: dims.iter().zip(&r[1..]).map(|(&d, &rd)| rand_matrix(rng, d, rd)).collect(),
            }),
            scalar: Some(ScalarSide {
                core: rand_matrix(rng, t[0], t[1]),
                d0: rand_matrix(rng, n, t[0] - q0),
                v1: rand_matrix(rng, p, t[1]),
            }),
        }
    }

    fn hyper(r: &[usize], t: [usize; 2], q0: usize, lambda: f64) -> HyperParams {
        HyperParams {
            tensor_ranks: r.to_vec(),
            scalar_ranks: t,
            shared: Some(q0),
            penalties: Penalties::tied(lambda),
            glm_tol: 1e-10,
            glm_max_iter: 500,
            ..Default::default()
        }
    }

    /// B_i by explicit index loops over a 2-mode tensor side.
    fn explicit_b(state: &TuckerState, i: usize) -> Vec<f64> {
        let t = state.tensor.as_ref().unwrap();
        let u0 = state.u0().unwrap();
        let (r0, r1, r2) = (t.core.shape()[0], t.core.shape()[1], t.core.shape()[2]);
        let (i1, i2) = (t.factors[0].rows(), t.factors[1].rows());
        let mut b = vec![0.0; i1 * i2];
        for a in 0..i1 {
            for c in 0..i2 {
                let mut s = 0.0;
                for k0 in 0..r0 {
                    for k1 in 0..r1 {
                        for k2 in 0..r2 {
                            s += t.core.get(&[k0, k1, k2])
                                * u0.get(i, k0)
                                * t.factors[0].get(a, k1)
                                * t.factors[1].get(c, k2);
                        }
                    }
                }
                b[a * i2 + c] = s;
            }
        }
        b
    }

    fn explicit_gamma(state: &TuckerState, i: usize) -> Vec<f64> {
        let s = state.scalar.as_ref().unwrap();
        let v0 = state.v0().unwrap();
        (0..s.v1.rows())
            .map(|a| {
                let mut acc = 0.0;
                for k0 in 0..s.core.rows() {
                    for k1 in 0..s.core.cols() {
                        acc += s.core.get(k0, k1) * v0.get(i, k0) * s.v1.get(a, k1);
                    }
                }
                acc
            })
            .collect()
    }

    #[test]
    fn zero_state_has_zero_gaussian_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tasks = mixed_tasks(&mut rng, 3, 6, 2, &[2, 3]);
        let mut state = random_state(&mut rng, 3, 1, &[2, 2, 2], &[2, 3], [2, 2], 2);
        let t = state.tensor.as_mut().unwrap();
        t.core = DenseTensor::zeros(vec![2, 2, 2]);
        state.scalar.as_mut().unwrap().core = Matrix::zeros(2, 2);
        let h = hyper(&[2, 2, 2], [2, 2], 1, 0.0);
        assert_eq!(objective(&state, &tasks, &h).unwrap(), 0.0);
        for m in reconstruct_models(&state) {
            assert!(m.gamma.iter().all(|&g| g == 0.0));
            assert!(m.b.unwrap().data().iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn objective_matches_explicit_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let tasks = mixed_tasks(&mut rng, 4, 5, 3, &[3, 2]);
        let state = random_state(&mut rng, 4, 1, &[3, 2, 2], &[3, 2], [2, 2], 3);
        for family in [Family::Gaussian, Family::Bernoulli] {
            let mut h = hyper(&[3, 2, 2], [2, 2], 1, 0.0);
            h.family = family;
            h.penalties = Penalties { g: 0.3, h: 0.2, u: 0.1, v: 0.05 };
            let tasks: Vec<TaskDataset> = match family {
                Family::Gaussian => tasks.clone(),
                Family::Bernoulli => tasks
                    .iter()
                    .map(|t| TaskDataset {
                        y: t.y.iter().map(|&v| f64::from(v > 0.0)).collect(),
                        ..t.clone()
                    })
                    .collect(),
            };
            let mut oracle = 0.0;
            for (i, t) in tasks.iter().enumerate() {
                let b = explicit_b(&state, i);
                let g = explicit_gamma(&state, i);
                for j in 0..t.n_samples() {
                    let theta = dot(&g, t.z.row(j)) + dot(&b, t.x[j].data());
                    oracle += -t.y[j] * theta + family.cumulant(theta);
                }
            }
            let ts = state.tensor.as_ref().unwrap();
            let ss = state.scalar.as_ref().unwrap();
            oracle += 0.3 * ts.core.l1_norm()
                + 0.1 * ts.factors.iter().map(Matrix::l1_norm).sum::<f64>()
                + 0.2 * ss.core.l1_norm()
                + 0.05 * ss.v1.l1_norm();
            let got = objective(&state, &tasks, &h).unwrap();
            assert!((got - oracle).abs() <= 1e-10 * oracle.abs().max(1.0), "{got} vs {oracle}");
        }
    }

    #[test]
    fn reconstruction_matches_index_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let state = random_state(&mut rng, 5, 2, &[3, 2, 3], &[4, 3], [2, 3], 4);
        for (i, m) in reconstruct_models(&state).iter().enumerate() {
            let b = explicit_b(&state, i);
            for (x, y) in m.b.as_ref().unwrap().data().iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
            for (x, y) in m.gamma.iter().zip(explicit_gamma(&state, i)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shared_columns_default_and_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tasks = mixed_tasks(&mut rng, 4, 5, 3, &[3, 2]);
        let layout = TaskLayout::of(&tasks).unwrap();
        let mut h = hyper(&[3, 2, 2], [2, 2], 0, 0.0);
        h.shared = None;
        assert_eq!(h.resolve(&layout).unwrap().shared, 1);
        h.shared = Some(3);
        assert!(matches!(h.resolve(&layout), Err(FitError::InvalidRanks(_))));
        h.shared = Some(0);
        assert_eq!(h.resolve(&layout).unwrap().shared, 0);

        for bad in [vec![5, 2, 2], vec![0, 2, 2], vec![3, 4, 2], vec![3, 2]] {
            let h = hyper(&bad, [2, 2], 0, 0.0);
            assert!(matches!(h.resolve(&layout), Err(FitError::InvalidRanks(_))), "{bad:?}");
        }
        let h = hyper(&[3, 2, 2], [2, 4], 0, 0.0);
        assert!(matches!(h.resolve(&layout), Err(FitError::InvalidRanks(_))));

        let vector: Vec<TaskDataset> = mixed_tasks(&mut rng, 4, 5, 3, &[]);
        let mut h = hyper(&[], [2, 2], 0, 0.0);
        h.shared = None;
        let r = h.resolve(&TaskLayout::of(&vector).unwrap()).unwrap();
        assert_eq!((r.tensor, r.scalar, r.shared), (None, Some([2, 2]), 0));
    }

    #[test]
    fn negative_penalty_and_epsilon_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tasks = mixed_tasks(&mut rng, 3, 5, 2, &[]);
        let layout = TaskLayout::of(&tasks).unwrap();
        let mut h = hyper(&[], [1, 1], 0, -1.0);
        assert!(matches!(h.resolve(&layout), Err(FitError::InvalidParameter(_))));
        h.penalties = Penalties::tied(0.0);
        h.epsilon = 0.0;
        assert!(matches!(h.resolve(&layout), Err(FitError::InvalidParameter(_))));
    }

    #[test]
    fn large_epsilon_stops_after_one_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let tasks = mixed_tasks(&mut rng, 4, 8, 2, &[2, 2]);
        let mut h = hyper(&[2, 2, 2], [2, 2], 1, 0.01);
        h.epsilon = 1.0;
        let (_, trace) = fit(&tasks, &h).unwrap();
        assert_eq!(trace.objectives.len(), 2);
        assert_eq!(trace.iterations, 1);
        assert!(trace.converged);
        assert!(trace.final_relative_change < 1.0);
    }

    #[test]
    fn zero_model_predictions() {
        let m = PersonalizedModel {
            task_id: "a".into(),
            b: Some(DenseTensor::zeros(vec![2, 2])),
            gamma: vec![0.0; 3],
        };
        let x = DenseTensor::new(vec![2, 2], vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let z = [1.0, 2.0, -1.0];
        assert_eq!(predict(&m, &z, Some(&x), Family::Gaussian).unwrap(), 0.0);
        assert_eq!(predict(&m, &z, Some(&x), Family::Bernoulli).unwrap(), 0.5);
        assert!(predict(&m, &z[..2], Some(&x), Family::Gaussian).is_err());
        assert!(predict(&m, &z, None, Family::Gaussian).is_err());
    }

    #[test]
    fn prediction_matches_manual_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = rand_tensor(&mut rng, &[3, 2]);
        let gamma: Vec<f64> = (0..4).map(|_| normal(&mut rng)).collect();
        let x = rand_tensor(&mut rng, &[3, 2]);
        let z: Vec<f64> = (0..4).map(|_| normal(&mut rng)).collect();
        let m = PersonalizedModel { task_id: "t".into(), b: Some(b.clone()), gamma: gamma.clone() };
        let mut theta: f64 = gamma.iter().zip(&z).map(|(a, b)| a * b).sum();
        for k in 0..6 {
            theta += b.data()[k] * x.data()[k];
        }
        let got = predict(&m, &z, Some(&x), Family::Bernoulli).unwrap();
        assert!((got - 1.0 / (1.0 + (-theta).exp())).abs() < 1e-14);
    }

    /// Central-difference derivative of the objective along one entry.
    fn directional(state: &TuckerState, tasks: &[TaskDataset], h: &HyperParams, set: &dyn Fn(&mut TuckerState, f64), step: f64) -> (f64, f64, f64) {
        let mut plus = state.clone();
        set(&mut plus, step);
        let mut minus = state.clone();
        set(&mut minus, -step);
        (
            objective(&plus, tasks, h).unwrap(),
            objective(state, tasks, h).unwrap(),
            objective(&minus, tasks, h).unwrap(),
        )
    }

    #[test]
    fn row_updates_are_stationary_and_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let tasks = mixed_tasks(&mut rng, 4, 12, 3, &[3, 2]);
        let h = hyper(&[3, 2, 2], [3, 2], 1, 0.0);
        let mut state = initialize(&tasks, &h).unwrap();
        let before = objective(&state, &tasks, &h).unwrap();
        for i in 0..4 {
            let w = update_w0_row(i, &state, &tasks[i], &h).unwrap();
            state.w0.row_mut(i).copy_from_slice(&w);
            let f = update_f0_row(i, &state, &tasks[i], &h).unwrap();
            state.tensor.as_mut().unwrap().f0.row_mut(i).copy_from_slice(&f);
            let d = update_d0_row(i, &state, &tasks[i], &h).unwrap();
            state.scalar.as_mut().unwrap().d0.row_mut(i).copy_from_slice(&d);
        }
        let after = objective(&state, &tasks, &h).unwrap();
        assert!(after <= before + 1e-9);

        // d0 was solved last, so its gradient vanishes
        for i in 0..4 {
            for c in 0..2 {
                let (p, _, m) = directional(&state, &tasks, &h, &|s, e| {
                    let d0 = &mut s.scalar.as_mut().unwrap().d0;
                    d0.set(i, c, d0.get(i, c) + e);
                }, 1e-5);
                let grad = (p - m) / 2e-5;
                assert!(grad.abs() < 1e-4, "task {i} col {c}: {grad}");
            }
            let again = update_d0_row(i, &state, &tasks[i], &h).unwrap();
            for (a, b) in again.iter().zip(state.scalar.as_ref().unwrap().d0.row(i)) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn lasso_blocks_are_optimal_along_every_coordinate() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let tasks = mixed_tasks(&mut rng, 4, 10, 3, &[3, 2]);
        let h = hyper(&[2, 2, 2], [2, 2], 1, 0.5);
        let mut state = initialize(&tasks, &h).unwrap();
        let step = 1e-4;
        let slack = |base: f64| 1e-9 * base.abs().max(1.0);

        let u1 = update_ud(1, &state, &tasks, &h).unwrap();
        let before = objective(&state, &tasks, &h).unwrap();
        state.tensor.as_mut().unwrap().factors[0] = u1;
        assert!(objective(&state, &tasks, &h).unwrap() <= before + slack(before));
        for k in 0..6 {
            let (p, o, m) = directional(&state, &tasks, &h, &|s, e| {
                s.tensor.as_mut().unwrap().factors[0].data_mut()[k] += e;
            }, step);
            assert!(p >= o - slack(o) && m >= o - slack(o), "U1[{k}]");
        }

        let g = update_core_g(&state, &tasks, &h).unwrap();
        state.tensor.as_mut().unwrap().core = g;
        for k in 0..8 {
            let (p, o, m) = directional(&state, &tasks, &h, &|s, e| {
                s.tensor.as_mut().unwrap().core.data_mut()[k] += e;
            }, step);
            assert!(p >= o - slack(o) && m >= o - slack(o), "G[{k}]");
        }

        let v1 = update_v1(&state, &tasks, &h).unwrap();
        state.scalar.as_mut().unwrap().v1 = v1;
        for k in 0..6 {
            let (p, o, m) = directional(&state, &tasks, &h, &|s, e| {
                s.scalar.as_mut().unwrap().v1.data_mut()[k] += e;
            }, step);
            assert!(p >= o - slack(o) && m >= o - slack(o), "V1[{k}]");
        }

        let hc = update_core_h(&state, &tasks, &h).unwrap();
        state.scalar.as_mut().unwrap().core = hc;
        for k in 0..4 {
            let (p, o, m) = directional(&state, &tasks, &h, &|s, e| {
                s.scalar.as_mut().unwrap().core.data_mut()[k] += e;
            }, step);
            assert!(p >= o - slack(o) && m >= o - slack(o), "H[{k}]");
        }
    }

    #[test]
    fn huge_penalty_zeroes_lasso_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let tasks = mixed_tasks(&mut rng, 3, 8, 2, &[2, 2]);
        let h = hyper(&[2, 2, 2], [2, 2], 1, 1e9);
        let state = initialize(&tasks, &h).unwrap();
        assert!(update_core_g(&state, &tasks, &h).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(update_ud(2, &state, &tasks, &h).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(update_v1(&state, &tasks, &h).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(update_core_h(&state, &tasks, &h).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_blocks_are_no_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tasks = mixed_tasks(&mut rng, 3, 8, 2, &[2, 2]);
        let h = hyper(&[2, 2, 2], [2, 2], 0, 0.0);
        let state = initialize(&tasks, &h).unwrap();
        assert_eq!(state.w0.cols(), 0);
        assert_eq!(state.u0().unwrap(), state.tensor.as_ref().unwrap().f0);
        assert_eq!(state.v0().unwrap(), state.scalar.as_ref().unwrap().d0);
        assert!(update_w0_row(0, &state, &tasks[0], &h).unwrap().is_empty());
        let (fitted, trace) = fit(&tasks, &h).unwrap();
        assert!(fitted.is_finite() && trace.iterations >= 1);

        // fully shared task factors leave nothing distinct to update
        let h = hyper(&[2, 2, 2], [2, 2], 2, 0.0);
        let state = initialize(&tasks, &h).unwrap();
        assert!(update_f0_row(1, &state, &tasks[1], &h).unwrap().is_empty());
        assert!(update_d0_row(1, &state, &tasks[1], &h).unwrap().is_empty());

        // no scalar predictors
        let tensor_only: Vec<TaskDataset> = mixed_tasks(&mut rng, 3, 8, 0, &[2, 2]);
        let h = hyper(&[2, 2, 2], [1, 1], 0, 0.0);
        let (s, _) = fit(&tensor_only, &h).unwrap();
        assert!(s.scalar.is_none());
        assert!(update_v1(&s, &tensor_only, &h).is_err());
    }

    #[test]
    fn single_task_full_rank_initialization_is_lossless() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let tasks = mixed_tasks(&mut rng, 1, 20, 2, &[2, 3]);
        let h = hyper(&[1, 2, 3], [1, 2], 0, 0.0);
        let state = initialize(&tasks, &h).unwrap();
        let local = local_coefficients(&tasks, Family::Gaussian, 1e-6, 1e-10, 200).unwrap();
        let m = &reconstruct_models(&state)[0];
        let flat: Vec<f64> = m.gamma.iter().chain(m.b.as_ref().unwrap().data()).copied().collect();
        for (a, b) in flat.iter().zip(&local[0]) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn vector_fit_single_feature_is_ols_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 25;
        let z: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let y: Vec<f64> = z.iter().map(|v| 1.7 * v + 0.2 * normal(&mut rng)).collect();
        let slope = z.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / z.iter().map(|a| a * a).sum::<f64>();
        let task = TaskDataset::vector("0", y, Matrix::new(n, 1, z).unwrap()).unwrap();
        let vp = VectorParams { epsilon: 1e-12, max_iter: 200, glm_tol: 1e-12, ..Default::default() };
        let (state, _) = fit_vector(&[task], &vp).unwrap();
        assert!((state.coefficients().get(0, 0) - slope).abs() < 1e-8);
    }

    #[test]
    fn vector_fit_full_shrinkage() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let tasks = mixed_tasks(&mut rng, 3, 10, 4, &[]);
        let vp = VectorParams { task_rank: 2, feature_rank: 2, lambda_g: 1e9, lambda_u: 1e9, ..Default::default() };
        let (state, _) = fit_vector(&tasks, &vp).unwrap();
        assert!(state.coefficients().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn covariance_rank_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let u1 = rand_matrix(&mut rng, 6, 3);
        let (cov, rank) = implied_covariance(&Matrix::zeros(0, 3), &u1).unwrap();
        assert_eq!(rank, 0);
        assert!(cov.data().iter().all(|&v| v == 0.0));

        let g = rand_matrix(&mut rng, 1, 3);
        let (cov, rank) = implied_covariance(&g, &u1).unwrap();
        assert_eq!(rank, 1);
        let v = u1.mul_vec(g.row(0));
        for a in 0..6 {
            for b in 0..6 {
                assert!((cov.get(a, b) - v[a] * v[b]).abs() < 1e-12);
            }
        }

        let g = rand_matrix(&mut rng, 2, 3);
        assert_eq!(implied_covariance(&g, &u1).unwrap().1, 2);
        assert!(implied_covariance(&rand_matrix(&mut rng, 2, 2), &u1).is_err());
    }
}

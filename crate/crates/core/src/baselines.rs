//! Reference estimators: independent per-task models, one pooled model, and
//! Tucker smoothing of independently fitted parameters.

use serde::{Deserialize, Serialize};

use crate::glm::{fit_glm, Family, GlmProblem};
use crate::tenmtl::{
    local_coefficients, stack_coefficients, FitError, PersonalizedModel, TaskDataset, TaskLayout,
};
use crate::tensor::{hosvd, tucker_reconstruct, DenseTensor, Matrix, TuckerFactors};

pub const DEFAULT_RIDGE: f64 = 1e-6;
const GLM_TOL: f64 = 1e-9;
const GLM_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    Local,
    Global,
    LrTucker {
        tensor_ranks: Option<Vec<usize>>,
        scalar_ranks: Option<[usize; 2]>,
    },
}

fn model_from_flat(task_id: &str, coef: &[f64], layout: &TaskLayout) -> PersonalizedModel {
    let p = layout.n_scalar;
    PersonalizedModel {
        task_id: task_id.to_string(),
        gamma: coef[..p].to_vec(),
        b: layout.tensor_shape.as_ref().map(|dims| {
            DenseTensor::new(dims.clone(), coef[p..].to_vec()).expect("flat tensor coefficients")
        }),
    }
}

/// One GLM per task on `[z | vec(X)]`, with a ridge when a task has fewer
/// samples than coefficients.
pub fn fit_local(
    tasks: &[TaskDataset],
    family: Family,
    ridge: f64,
) -> Result<Vec<PersonalizedModel>, FitError> {
    let layout = TaskLayout::of(tasks)?;
    let coefs = local_coefficients(tasks, family, ridge, GLM_TOL, GLM_MAX_ITER)?;
    Ok(tasks
        .iter()
        .zip(&coefs)
        .map(|(t, c)| model_from_flat(&t.task_id, c, &layout))
        .collect())
}

/// One GLM on the pooled samples of every task; the returned model is shared
/// by all tasks and carries an empty task id.
pub fn fit_global(
    tasks: &[TaskDataset],
    family: Family,
    ridge: f64,
) -> Result<PersonalizedModel, FitError> {
    let layout = TaskLayout::of(tasks)?;
    let q = layout.flat_dim();
    let mut data = Vec::new();
    let mut y = Vec::new();
    for t in tasks {
        data.extend_from_slice(t.flat_design().data());
        y.extend_from_slice(&t.y);
    }
    let n = y.len();
    let mut problem = GlmProblem::new(Matrix::new(n, q, data)?, y, vec![0.0; n], 0.0, family)?;
    if n < q {
        problem = problem.with_ridge(ridge)?;
    }
    let sol = fit_glm(&problem, &vec![0.0; q], GLM_TOL, GLM_MAX_ITER)?;
    Ok(model_from_flat("", &sol.coefficients, &layout))
}

/// The pooled model copied once per task, with each task's id.
pub fn fit_global_per_task(
    tasks: &[TaskDataset],
    family: Family,
    ridge: f64,
) -> Result<Vec<PersonalizedModel>, FitError> {
    let shared = fit_global(tasks, family, ridge)?;
    Ok(tasks
        .iter()
        .map(|t| PersonalizedModel {
            task_id: t.task_id.clone(),
            ..shared.clone()
        })
        .collect())
}

fn smooth(stack: &DenseTensor, ranks: &[usize]) -> Result<DenseTensor, FitError> {
    let f: TuckerFactors = hosvd(stack, ranks)?;
    Ok(tucker_reconstruct(&f)?)
}

/// Local fits followed by truncated HOSVD of the stacked tensor coefficients
/// at `tensor_ranks` and of the stacked scalar coefficients at `scalar_ranks`.
pub fn fit_lr_tucker(
    tasks: &[TaskDataset],
    family: Family,
    tensor_ranks: Option<&[usize]>,
    scalar_ranks: Option<[usize; 2]>,
    ridge: f64,
) -> Result<Vec<PersonalizedModel>, FitError> {
    let layout = TaskLayout::of(tasks)?;
    let coefs = local_coefficients(tasks, family, ridge, GLM_TOL, GLM_MAX_ITER)?;
    let (gamma, b) = stack_coefficients(&coefs, &layout);
    let gamma = match gamma {
        Some(g) => {
            let t = scalar_ranks.ok_or_else(|| {
                FitError::InvalidRanks("scalar ranks required for scalar predictors".into())
            })?;
            let s = smooth(&DenseTensor::from_matrix(&g), &t)?;
            Some(Matrix::new(g.rows(), g.cols(), s.into_data())?)
        }
        None => None,
    };
    let b = match b {
        Some(b) => {
            let r = tensor_ranks.ok_or_else(|| {
                FitError::InvalidRanks("tensor ranks required for tensor predictors".into())
            })?;
            if r.len() != b.order() {
                return Err(FitError::InvalidRanks(format!(
                    "{} ranks for an order-{} coefficient stack",
                    r.len(),
                    b.order()
                )));
            }
            Some(smooth(&b, r)?)
        }
        None => None,
    };
    let per_task = b.as_ref().map_or(0, |b| b.len() / layout.n_tasks);
    Ok(tasks
        .iter()
        .enumerate()
        .map(|(i, t)| PersonalizedModel {
            task_id: t.task_id.clone(),
            gamma: gamma.as_ref().map_or_else(Vec::new, |g| g.row(i).to_vec()),
            b: b.as_ref().map(|b| {
                let dims = layout.tensor_shape.clone().expect("tensor layout");
                DenseTensor::new(dims, b.data()[i * per_task..(i + 1) * per_task].to_vec())
                    .expect("task slice")
            }),
        })
        .collect())
}

/// Dispatches on `kind`; every variant returns one model per task.
pub fn fit_baseline(
    kind: &BaselineKind,
    tasks: &[TaskDataset],
    family: Family,
    ridge: f64,
) -> Result<Vec<PersonalizedModel>, FitError> {
    match kind {
        BaselineKind::Local => fit_local(tasks, family, ridge),
        BaselineKind::Global => fit_global_per_task(tasks, family, ridge),
        BaselineKind::LrTucker {
            tensor_ranks,
            scalar_ranks,
        } => fit_lr_tucker(tasks, family, tensor_ranks.as_deref(), *scalar_ranks, ridge),
    }
}

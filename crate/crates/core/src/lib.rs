//! Personalized multi-task generalized linear and tensor regression with
//! Tucker-structured task parameters.
//!
//! The stacked per-task coefficient tensor and the stacked scalar
//! coefficients are each constrained to a Tucker form whose task-mode
//! factors share a common block of columns. Estimation alternates exact
//! convex block updates, each of which is a (lasso) GLM with fixed offsets.

pub mod baselines;
pub mod glm;
pub mod metrics;
pub mod simgen;
pub mod tenmtl;
pub mod tensor;
pub mod tuning;

pub use glm::{fit_glm, kkt_check, neg_log_likelihood, Family, GlmError, GlmProblem, GlmSolution};
pub use tenmtl::{
    FitError, FitTrace, HyperParams, Penalties, PersonalizedModel, TaskDataset, TuckerState,
};
pub use tensor::{DenseTensor, Matrix, TensorError, TuckerFactors};

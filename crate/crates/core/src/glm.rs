//! Exponential-family GLMs with an optional lasso penalty and fixed offsets.
//!
//! Every block update of the multi-task estimator reduces to one of these
//! problems:
//!
//! ```text
//! minimize  Σ_j ( -y_j η_j + b(η_j) ) + λ‖β‖₁ + ½ρ‖β‖²,   η = Xβ + o
//! ```
//!
//! The solver is a proximal Newton (IRLS) outer loop whose weighted
//! least-squares subproblem is solved by a feature-sign active-set search.
//! Cyclic coordinate descent with soft-thresholding takes over when a
//! restricted system is singular.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{dot, Matrix};

/// Linear predictor magnitude beyond which IRLS weights are frozen.
pub const ETA_CAP: f64 = 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlmError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("penalty must be finite and non-negative, got {0}")]
    InvalidPenalty(f64),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("non-finite input")]
    NonFinite,
}

/// Canonical-link exponential family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    #[default]
    Gaussian,
    Bernoulli,
}

impl Family {
    /// Cumulant function `b(θ)`.
    #[inline]
    pub fn cumulant(self, theta: f64) -> f64 {
        match self {
            Family::Gaussian => 0.5 * theta * theta,
            // log(1 + e^θ) without overflow
            Family::Bernoulli => {
                if theta > 0.0 {
                    theta + (-theta).exp().ln_1p()
                } else {
                    theta.exp().ln_1p()
                }
            }
        }
    }

    /// Mean function `b'(θ)`, the inverse canonical link.
    #[inline]
    pub fn mean(self, theta: f64) -> f64 {
        match self {
            Family::Gaussian => theta,
            Family::Bernoulli => {
                if theta >= 0.0 {
                    1.0 / (1.0 + (-theta).exp())
                } else {
                    let e = theta.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    /// Variance function `b''(θ)`.
    #[inline]
    pub fn variance(self, theta: f64) -> f64 {
        match self {
            Family::Gaussian => 1.0,
            Family::Bernoulli => {
                let m = self.mean(theta);
                m * (1.0 - m)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Bernoulli => "bernoulli",
        }
    }
}

/// `Σ_j (-y_j η_j + b(η_j))`.
pub fn neg_log_likelihood(family: Family, eta: &[f64], y: &[f64]) -> Result<f64, GlmError> {
    if eta.len() != y.len() {
        return Err(GlmError::Dimension(format!(
            "{} linear predictors, {} responses",
            eta.len(),
            y.len()
        )));
    }
    Ok(eta
        .iter()
        .zip(y)
        .map(|(&e, &yy)| -yy * e + family.cumulant(e))
        .sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmProblem {
    pub design: Matrix,
    pub response: Vec<f64>,
    pub offset: Vec<f64>,
    pub l1_penalty: f64,
    pub l2_penalty: f64,
    pub family: Family,
}

impl GlmProblem {
    pub fn new(
        design: Matrix,
        response: Vec<f64>,
        offset: Vec<f64>,
        l1_penalty: f64,
        family: Family,
    ) -> Result<Self, GlmError> {
        if design.rows() != response.len() || response.len() != offset.len() {
            return Err(GlmError::Dimension(format!(
                "design has {} rows, response {}, offset {}",
                design.rows(),
                response.len(),
                offset.len()
            )));
        }
        if !(l1_penalty.is_finite() && l1_penalty >= 0.0) {
            return Err(GlmError::InvalidPenalty(l1_penalty));
        }
        if response.iter().chain(&offset).any(|v| !v.is_finite()) {
            return Err(GlmError::NonFinite);
        }
        Ok(Self {
            design,
            response,
            offset,
            l1_penalty,
            l2_penalty: 0.0,
            family,
        })
    }

    /// Adds a ridge term `½ρ‖β‖²`.
    pub fn with_ridge(mut self, ridge: f64) -> Result<Self, GlmError> {
        if !(ridge.is_finite() && ridge >= 0.0) {
            return Err(GlmError::InvalidPenalty(ridge));
        }
        self.l2_penalty = ridge;
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.design.rows()
    }

    pub fn n_coefficients(&self) -> usize {
        self.design.cols()
    }

    pub fn linear_predictor(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.n_samples())
            .map(|j| dot(self.design.row(j), beta) + self.offset[j])
            .collect()
    }

    /// Penalized objective at `beta`.
    pub fn objective(&self, beta: &[f64]) -> f64 {
        let eta = self.linear_predictor(beta);
        let nll: f64 = eta
            .iter()
            .zip(&self.response)
            .map(|(&e, &y)| -y * e + self.family.cumulant(e))
            .sum();
        nll + self.l1_penalty * beta.iter().map(|b| b.abs()).sum::<f64>()
            + 0.5 * self.l2_penalty * dot(beta, beta)
    }

    /// Gradient of the smooth part (likelihood plus ridge).
    pub fn gradient(&self, beta: &[f64]) -> Vec<f64> {
        let eta = self.linear_predictor(beta);
        let resid: Vec<f64> = eta
            .iter()
            .zip(&self.response)
            .map(|(&e, &y)| self.family.mean(e) - y)
            .collect();
        let mut g = self.design.vec_mul(&resid);
        for (gk, bk) in g.iter_mut().zip(beta) {
            *gk += self.l2_penalty * bk;
        }
        g
    }

    /// Smallest l1 penalty for which β = 0 is optimal.
    pub fn lambda_max(&self) -> f64 {
        let zero = vec![0.0; self.n_coefficients()];
        self.gradient(&zero)
            .iter()
            .fold(0.0, |acc: f64, g| acc.max(g.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmSolution {
    pub coefficients: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub converged: bool,
    /// Some linear predictor exceeded [`ETA_CAP`] in magnitude (separation).
    pub eta_capped: bool,
}

/// Largest subgradient-optimality violation over coordinates.
pub fn kkt_check(p: &GlmProblem, beta: &[f64]) -> f64 {
    let g = p.gradient(beta);
    kkt_from_gradient(&g, beta, p.l1_penalty)
}

fn kkt_from_gradient(g: &[f64], beta: &[f64], l1: f64) -> f64 {
    g.iter()
        .zip(beta)
        .map(|(&gk, &bk)| {
            if bk != 0.0 {
                (gk + l1 * bk.signum()).abs()
            } else {
                (gk.abs() - l1).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Solves a [`GlmProblem`] from the warm start `init`.
///
/// The returned iterate never has a larger objective than `init`, up to
/// rounding-level steps taken while the KKT residual still shrinks.
pub fn fit_glm(
    p: &GlmProblem,
    init: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<GlmSolution, GlmError> {
    let q = p.n_coefficients();
    if init.len() != q {
        return Err(GlmError::Dimension(format!(
            "init has {} entries, problem has {} coefficients",
            init.len(),
            q
        )));
    }
    if !(tol > 0.0) {
        return Err(GlmError::InvalidTolerance(tol));
    }
    if q == 0 {
        return Ok(GlmSolution {
            coefficients: Vec::new(),
            objective: p.objective(&[]),
            iterations: 0,
            kkt_residual: 0.0,
            converged: true,
            eta_capped: false,
        });
    }
    let l1 = p.l1_penalty;
    if l1 > 0.0 && p.l2_penalty == 0.0 && l1 >= p.lambda_max() {
        let zero = vec![0.0; q];
        return Ok(GlmSolution {
            objective: p.objective(&zero),
            kkt_residual: kkt_check(p, &zero),
            coefficients: zero,
            iterations: 0,
            converged: true,
            eta_capped: false,
        });
    }

    let mut beta = init.to_vec();
    let mut obj = p.objective(&beta);
    let mut kkt = kkt_check(p, &beta);
    let mut eta_capped = false;
    let mut iterations = 0;
    let n = p.n_samples();
    let mut weights = vec![0.0; n];
    let mut resid = vec![0.0; n];

    while kkt > tol && iterations < max_iter {
        iterations += 1;
        let eta = p.linear_predictor(&beta);
        for j in 0..n {
            if eta[j].abs() > ETA_CAP {
                eta_capped = true;
            }
            let capped = eta[j].clamp(-ETA_CAP, ETA_CAP);
            weights[j] = p.family.variance(capped).max(1e-12);
            resid[j] = p.family.mean(eta[j]) - p.response[j];
        }
        let gram = weighted_gram(&p.design, &weights, p.l2_penalty);
        let mut grad = p.design.vec_mul(&resid);
        for (gk, bk) in grad.iter_mut().zip(&beta) {
            *gk += p.l2_penalty * bk;
        }
        // quadratic model ½βᵀAβ - cᵀβ with c = Aβ₀ - ∇
        let linear: Vec<f64> = (0..q)
            .map(|k| dot(&gram[k * q..(k + 1) * q], &beta) - grad[k])
            .collect();
        let mut candidate = beta.clone();
        solve_quadratic_lasso(&gram, &linear, l1, &mut candidate, 0.1 * tol);

        let mut step = 1.0;
        let mut accepted = false;
        // objective differences below this are rounding noise
        let resolution = 8.0 * f64::EPSILON * obj.abs().max(1.0);
        for _ in 0..40 {
            let trial: Vec<f64> = beta
                .iter()
                .zip(&candidate)
                .map(|(b, c)| b + step * (c - b))
                .collect();
            let trial_obj = p.objective(&trial);
            if trial_obj <= obj + resolution {
                // near the optimum the decrease is unresolvable; keep going
                // only while stationarity still improves
                let trial_kkt = kkt_check(p, &trial);
                if obj - trial_obj > resolution || trial_kkt < kkt {
                    accepted = true;
                    beta = trial;
                    obj = trial_obj;
                    kkt = trial_kkt;
                    break;
                }
                if trial_obj <= obj {
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if p.family == Family::Bernoulli
        && p.linear_predictor(&beta).iter().any(|e| e.abs() > ETA_CAP)
    {
        eta_capped = true;
    }
    Ok(GlmSolution {
        coefficients: beta,
        objective: obj,
        iterations,
        kkt_residual: kkt,
        converged: kkt <= tol,
        eta_capped,
    })
}

/// `Xᵀ diag(w) X + ρI` as a dense row-major `q × q` buffer.
fn weighted_gram(x: &Matrix, w: &[f64], ridge: f64) -> Vec<f64> {
    let q = x.cols();
    let mut a = vec![0.0; q * q];
    for (j, &wj) in w.iter().enumerate() {
        let row = x.row(j);
        for (r, &xr) in row.iter().enumerate() {
            let s = wj * xr;
            if s == 0.0 {
                continue;
            }
            let arow = &mut a[r * q..(r + 1) * q];
            for c in r..q {
                arow[c] += s * row[c];
            }
        }
    }
    for r in 0..q {
        a[r * q + r] += ridge;
        for c in 0..r {
            a[r * q + c] = a[c * q + r];
        }
    }
    a
}

#[inline]
fn soft_threshold(z: f64, l1: f64) -> f64 {
    if z > l1 {
        z - l1
    } else if z < -l1 {
        z + l1
    } else {
        0.0
    }
}

const MAX_SWEEPS: usize = 20_000;

/// Minimizes `½βᵀAβ - cᵀβ + λ‖β‖₁` in place, starting from `beta`.
///
/// `a` must be symmetric positive semidefinite with `c` in its range.
/// Returns the final subgradient violation.
pub(crate) fn solve_quadratic_lasso(
    a: &[f64],
    c: &[f64],
    l1: f64,
    beta: &mut [f64],
    tol: f64,
) -> f64 {
    let q = c.len();
    debug_assert_eq!(a.len(), q * q);
    if q == 0 {
        return 0.0;
    }
    if l1 == 0.0 {
        if let Some(sol) = solve_unpenalized(a, c) {
            let start = quadratic_value(a, c, 0.0, beta);
            if quadratic_value(a, c, 0.0, &sol) <= start {
                beta.copy_from_slice(&sol);
            }
            return quadratic_violation(&neg_gradient(a, c, beta), beta, 0.0);
        }
    }

    if l1 > 0.0 {
        // a zero diagonal means a zero row and column (A is PSD): the
        // coordinate only contributes its penalty
        for k in 0..q {
            if a[k * q + k] <= 0.0 {
                beta[k] = 0.0;
            }
        }
    }
    if let Some(viol) = feature_sign(a, c, l1, beta, tol) {
        return viol;
    }

    // g = c - Aβ
    let mut g = neg_gradient(a, c, beta);
    let mut viol = f64::INFINITY;
    for sweep in 0..MAX_SWEEPS {
        for k in 0..q {
            let akk = a[k * q + k];
            if akk <= 0.0 {
                continue;
            }
            let old = beta[k];
            let new = soft_threshold(g[k] + akk * old, l1) / akk;
            let delta = new - old;
            if delta != 0.0 {
                beta[k] = new;
                let col = &a[k * q..(k + 1) * q];
                for (gl, al) in g.iter_mut().zip(col) {
                    *gl -= delta * al;
                }
            }
        }
        viol = quadratic_violation(&g, beta, l1);
        if viol <= tol {
            break;
        }
        if sweep % 4 == 3 && try_active_set(a, c, l1, beta, &mut g, tol) {
            viol = quadratic_violation(&g, beta, l1);
            if viol <= tol {
                break;
            }
        }
    }
    viol
}

fn solve_subsystem(a: &[f64], q: usize, set: &[usize], rhs: &[f64]) -> Option<Vec<f64>> {
    let s = set.len();
    let mut sub = DMatrix::zeros(s, s);
    for (i, &ki) in set.iter().enumerate() {
        for (j, &kj) in set.iter().enumerate() {
            sub[(i, j)] = a[ki * q + kj];
        }
    }
    let x = sub.cholesky()?.solve(&DVector::from_column_slice(rhs));
    x.iter()
        .all(|v| v.is_finite())
        .then(|| x.iter().copied().collect())
}

/// Active-set search over sign patterns: alternately activates the zero
/// coordinate with the largest gradient violation and solves the
/// sign-restricted system exactly, line searching across sign changes.
/// Returns `None` when a restricted system is singular or progress stalls,
/// leaving `beta` at a point no worse than the start.
fn feature_sign(a: &[f64], c: &[f64], l1: f64, beta: &mut [f64], tol: f64) -> Option<f64> {
    let q = c.len();
    let mut g = neg_gradient(a, c, beta);
    let mut obj = quadratic_value(a, c, l1, beta);
    for _ in 0..(4 * q + 100) {
        let mut signs: Vec<f64> = beta.iter().map(|b| b.signum() * f64::from(*b != 0.0)).collect();
        let active_viol = (0..q)
            .filter(|&k| beta[k] != 0.0)
            .map(|k| (-g[k] + l1 * signs[k]).abs())
            .fold(0.0, f64::max);
        if active_viol <= tol {
            let entering = (0..q)
                .filter(|&k| beta[k] == 0.0)
                .max_by(|&x, &y| g[x].abs().total_cmp(&g[y].abs()));
            match entering {
                Some(k) if g[k].abs() > l1 + tol => signs[k] = g[k].signum(),
                _ => return Some(quadratic_violation(&g, beta, l1)),
            }
        }
        let set: Vec<usize> = (0..q).filter(|&k| signs[k] != 0.0).collect();
        let rhs: Vec<f64> = set.iter().map(|&k| c[k] - l1 * signs[k]).collect();
        let x = solve_subsystem(a, q, &set, &rhs)?;

        let mut target = beta.to_vec();
        for (i, &k) in set.iter().enumerate() {
            target[k] = x[i];
        }
        // candidate points: the restricted solution and every sign change
        let mut best = (quadratic_value(a, c, l1, &target), target.clone());
        for &k in &set {
            let (from, to) = (beta[k], target[k]);
            if from != 0.0 && from.signum() != to.signum() {
                let t = from / (from - to);
                let mut point: Vec<f64> =
                    beta.iter().zip(&target).map(|(b, x)| b + t * (x - b)).collect();
                point[k] = 0.0;
                let v = quadratic_value(a, c, l1, &point);
                if v < best.0 {
                    best = (v, point);
                }
            }
        }
        if !(best.0 <= obj) {
            return None;
        }
        let stalled = best.1 == *beta;
        beta.copy_from_slice(&best.1);
        obj = best.0;
        g = neg_gradient(a, c, beta);
        if stalled {
            let viol = quadratic_violation(&g, beta, l1);
            return (viol <= tol).then_some(viol);
        }
    }
    None
}

fn neg_gradient(a: &[f64], c: &[f64], beta: &[f64]) -> Vec<f64> {
    let q = c.len();
    (0..q)
        .map(|k| c[k] - dot(&a[k * q..(k + 1) * q], beta))
        .collect()
}

fn quadratic_value(a: &[f64], c: &[f64], l1: f64, beta: &[f64]) -> f64 {
    let q = c.len();
    let mut v = 0.0;
    for k in 0..q {
        v += 0.5 * beta[k] * dot(&a[k * q..(k + 1) * q], beta) - c[k] * beta[k];
        v += l1 * beta[k].abs();
    }
    v
}

// g holds the negative gradient here
fn quadratic_violation(g: &[f64], beta: &[f64], l1: f64) -> f64 {
    g.iter()
        .zip(beta)
        .map(|(&gk, &bk)| {
            if bk != 0.0 {
                (-gk + l1 * bk.signum()).abs()
            } else {
                (gk.abs() - l1).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

fn solve_unpenalized(a: &[f64], c: &[f64]) -> Option<Vec<f64>> {
    let q = c.len();
    let am = DMatrix::from_row_slice(q, q, a);
    let cv = DVector::from_column_slice(c);
    if let Some(chol) = am.clone().cholesky() {
        let x = chol.solve(&cv);
        if x.iter().all(|v| v.is_finite()) {
            return Some(x.iter().copied().collect());
        }
    }
    // rank deficient: minimum-norm solution
    let svd = am.svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let x = svd.solve(&cv, smax * 1e-12 + f64::MIN_POSITIVE).ok()?;
    x.iter()
        .all(|v| v.is_finite())
        .then(|| x.iter().copied().collect())
}

/// Exact solve with the current active set and signs held fixed; accepted
/// only when it is sign consistent, satisfies the inactive-set conditions
/// and does not increase the quadratic objective.
fn try_active_set(
    a: &[f64],
    c: &[f64],
    l1: f64,
    beta: &mut [f64],
    g: &mut [f64],
    tol: f64,
) -> bool {
    let q = c.len();
    let active: Vec<usize> = (0..q).filter(|&k| beta[k] != 0.0).collect();
    if active.is_empty() {
        return false;
    }
    let s = active.len();
    let mut sub = DMatrix::zeros(s, s);
    let mut rhs = DVector::zeros(s);
    for (i, &ki) in active.iter().enumerate() {
        for (j, &kj) in active.iter().enumerate() {
            sub[(i, j)] = a[ki * q + kj];
        }
        rhs[i] = c[ki] - l1 * beta[ki].signum();
    }
    let Some(chol) = sub.cholesky() else {
        return false;
    };
    let x = chol.solve(&rhs);
    let mut trial = vec![0.0; q];
    for (i, &k) in active.iter().enumerate() {
        if !x[i].is_finite() || x[i] * beta[k].signum() <= 0.0 {
            return false;
        }
        trial[k] = x[i];
    }
    let tg = neg_gradient(a, c, &trial);
    let inactive_ok = (0..q)
        .filter(|k| trial[*k] == 0.0)
        .all(|k| tg[k].abs() <= l1 + tol);
    if !inactive_ok {
        return false;
    }
    if quadratic_value(a, c, l1, &trial) > quadratic_value(a, c, l1, beta) {
        return false;
    }
    beta.copy_from_slice(&trial);
    g.copy_from_slice(&tg);
    true
}

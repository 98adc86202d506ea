//! The dynamic harmless-fairness update.
//!
//! Each step combines the gradient of the mean loss (primary objective) with
//! the gradient of the loss standard deviation (secondary objective):
//!
//! ```text
//! theta <- theta - step * (lambda * grad_mu + grad_sigma)
//! lambda = max(lambda1, lambda2)
//! lambda1 = max(0, eps - grad_mu . grad_sigma / |grad_mu|^2)
//! lambda2 = mu / sigma
//! ```
//!
//! `lambda1` keeps the component of the combined gradient along `grad_mu`
//! at least `eps * grad_mu`; `lambda2` keeps every implied example weight
//! `lambda + (l_i - mu) / sigma` non-negative. The mean `mu` is an
//! exponential moving average across mini-batches, started at zero and never
//! bias-corrected.

mod dispersion;

use serde::{Deserialize, Serialize};

use crate::nnet::{forward_pass, Batch, LossVector, ModelSpec, ParameterVector};
use crate::{Error, Result};

pub use dispersion::{
    all_pairs_abs_diff_sum, consecutive_abs_diff_sum, pairwise_variance, population_variance,
    std_bound_on_range,
};

/// Squared primary-gradient norm below which `lambda1` is treated as zero.
pub const GRAD_MU_VANISHING_SQ: f64 = 1e-18;

/// Secondary objective measuring the spread of per-example losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairObjectiveKind {
    /// `sqrt((1/b) sum (l_i - mu)^2)`
    #[default]
    StdDev,
    /// `(1/b) sum (l_i - mu)^2`
    Variance,
    /// `(1/b) sum_k |l_(k) - l_(k+1)|` over the losses sorted ascending.
    Pairwise,
}

/// Running state of the update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateState {
    pub ema_mean: f64,
    pub decay: f64,
    pub step_size: f64,
    pub epsilon_projection: f64,
    /// Upper clamp on `mu / sigma`; `None` disables it.
    pub lambda2_cap: Option<f64>,
    pub sigma_floor: f64,
    pub step_count: u64,
}

impl UpdateState {
    pub fn new(step_size: f64) -> Self {
        UpdateState {
            ema_mean: 0.0,
            decay: 0.99,
            step_size,
            epsilon_projection: 1.0,
            lambda2_cap: Some(3.0),
            sigma_floor: 1e-12,
            step_count: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::Config(format!("decay must lie in (0, 1), got {}", self.decay)));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::Config(format!("step size must be > 0, got {}", self.step_size)));
        }
        if !(self.sigma_floor > 0.0) {
            return Err(Error::Config("sigma floor must be > 0".into()));
        }
        if let Some(cap) = self.lambda2_cap {
            if !(cap > 0.0) {
                return Err(Error::Config(format!("lambda2 cap must be > 0, got {cap}")));
            }
        }
        Ok(())
    }
}

/// Diagnostics of one update; one row of the step trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: u64,
    pub mu: f64,
    pub sigma: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda: f64,
    pub grad_mu_norm: f64,
    pub grad_dot: f64,
    pub weights_min: f64,
}

impl StepReport {
    /// The primary gradient was numerically zero and `lambda1` was forced to 0.
    pub fn primary_vanished(&self) -> bool {
        self.grad_mu_norm * self.grad_mu_norm < GRAD_MU_VANISHING_SQ
    }
}

/// `beta * mu_prev + (1 - beta) * mean(losses)`.
pub fn ema_update(mu_prev: f64, losses: &LossVector, beta: f64) -> Result<f64> {
    if losses.is_empty() {
        return Err(Error::Data("cannot average an empty loss vector".into()));
    }
    Ok(beta * mu_prev + (1.0 - beta) * losses.mean())
}

/// Root mean square deviation of the losses around `mu` (not around the batch
/// mean), floored at `sigma_floor`.
pub fn batch_sigma(losses: &LossVector, mu: f64, sigma_floor: f64) -> f64 {
    let l = losses.as_slice();
    let second_moment = l.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / l.len() as f64;
    second_moment.sqrt().max(sigma_floor)
}

pub fn grad_mu(spec: &ModelSpec, params: &ParameterVector, batch: &Batch) -> Result<ParameterVector> {
    crate::nnet::grad_mean(spec, params, batch)
}

/// `(1/b) sum_j ((l_j - mu) / sigma) dl_j/dtheta`.
///
/// This is the exact gradient of the batch standard deviation when `mu` and
/// `sigma` are the batch mean and standard deviation.
pub fn grad_sigma(
    spec: &ModelSpec,
    params: &ParameterVector,
    batch: &Batch,
    mu: f64,
    sigma: f64,
) -> Result<ParameterVector> {
    let pass = forward_pass(spec, params, batch)?;
    pass.weighted_gradient(&z_scores(pass.losses(), mu, sigma))
}

fn z_scores(losses: &LossVector, mu: f64, sigma: f64) -> Vec<f64> {
    losses.as_slice().iter().map(|l| (l - mu) / sigma).collect()
}

/// `max(0, eps - grad_mu . grad_sigma / |grad_mu|^2)`, or 0 when `grad_mu`
/// vanishes.
pub fn lambda1(grad_mu: &ParameterVector, grad_sigma: &ParameterVector, epsilon: f64) -> f64 {
    let norm_sq = grad_mu.norm_sq();
    if norm_sq < GRAD_MU_VANISHING_SQ {
        return 0.0;
    }
    (epsilon - grad_mu.dot(grad_sigma) / norm_sq).max(0.0)
}

/// `mu / sigma`, clamped to `cap` when one is set.
pub fn lambda2(mu: f64, sigma: f64, cap: Option<f64>) -> f64 {
    let raw = mu / sigma;
    cap.map_or(raw, |c| raw.min(c))
}

/// Example weights `lambda + (l_i - mu) / sigma` of the combined gradient.
pub fn combined_weights(losses: &LossVector, mu: f64, sigma: f64, lambda: f64) -> Vec<f64> {
    z_scores(losses, mu, sigma).into_iter().map(|z| lambda + z).collect()
}

/// Per-example coefficients `phi_i` of the sorted consecutive-difference sum,
/// i.e. `d/dl_i sum_k |l_(k) - l_(k+1)|`, with `sign(0) = 0` on ties.
pub fn pairwise_coefficients(losses: &LossVector) -> Vec<f64> {
    let l = losses.as_slice();
    let mut order: Vec<usize> = (0..l.len()).collect();
    order.sort_by(|&a, &b| l[a].total_cmp(&l[b]));
    let sign = |x: f64| {
        if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    let mut phi = vec![0.0; l.len()];
    for (k, &i) in order.iter().enumerate() {
        let mut c = 0.0;
        if k > 0 {
            c += sign(l[i] - l[order[k - 1]]);
        }
        if k + 1 < order.len() {
            c += sign(l[i] - l[order[k + 1]]);
        }
        phi[i] = c;
    }
    phi
}

/// Example weights of the secondary gradient and the matching `lambda2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondaryTerm {
    pub weights: Vec<f64>,
    pub lambda2: f64,
}

/// Secondary gradient weights for the chosen objective.
///
/// For the standard deviation, a `sigma` at the floor means every loss
/// already equals `mu`; the secondary gradient is then zero and all combined
/// weights equal `lambda`, so no `lambda2` is needed.
pub fn secondary_term(
    kind: FairObjectiveKind,
    losses: &LossVector,
    mu: f64,
    sigma: f64,
    state: &UpdateState,
) -> SecondaryTerm {
    match kind {
        FairObjectiveKind::StdDev if sigma <= state.sigma_floor => SecondaryTerm {
            weights: vec![0.0; losses.len()],
            lambda2: 0.0,
        },
        FairObjectiveKind::StdDev => SecondaryTerm {
            weights: z_scores(losses, mu, sigma),
            lambda2: lambda2(mu, sigma, state.lambda2_cap),
        },
        FairObjectiveKind::Variance => SecondaryTerm {
            weights: losses.as_slice().iter().map(|l| 2.0 * (l - mu)).collect(),
            lambda2: 2.0 * (mu - losses.min()),
        },
        FairObjectiveKind::Pairwise => SecondaryTerm {
            weights: pairwise_coefficients(losses),
            lambda2: 2.0,
        },
    }
}

/// Computes the combined descent direction `lambda * grad_mu + grad_secondary`
/// and advances the moving-average state. `state` is left untouched on error.
pub fn vfair_direction(
    state: &mut UpdateState,
    spec: &ModelSpec,
    params: &ParameterVector,
    batch: &Batch,
    kind: FairObjectiveKind,
) -> Result<(ParameterVector, StepReport)> {
    let pass = forward_pass(spec, params, batch)?;
    let losses = pass.losses();
    let mu = ema_update(state.ema_mean, losses, state.decay)?;
    let sigma = batch_sigma(losses, mu, state.sigma_floor);

    let primary = pass.weighted_gradient(&vec![1.0; losses.len()])?;
    let secondary_term = secondary_term(kind, losses, mu, sigma, state);
    let secondary = pass.weighted_gradient(&secondary_term.weights)?;

    let grad_dot = primary.dot(&secondary);
    let l1 = lambda1(&primary, &secondary, state.epsilon_projection);
    let lambda = l1.max(secondary_term.lambda2);

    let mut direction = secondary;
    direction.axpy(lambda, &primary);
    if !direction.is_finite() {
        return Err(Error::Numeric("combined gradient is not finite".into()));
    }

    let weights_min = secondary_term
        .weights
        .iter()
        .map(|w| lambda + w)
        .fold(f64::INFINITY, f64::min);
    state.ema_mean = mu;
    state.step_count += 1;
    let report = StepReport {
        step: state.step_count,
        mu,
        sigma,
        lambda1: l1,
        lambda2: secondary_term.lambda2,
        lambda,
        grad_mu_norm: primary.norm(),
        grad_dot,
        weights_min,
    };
    Ok((direction, report))
}

/// One plain gradient step `theta <- theta - step_size * direction`.
pub fn vfair_step(
    state: &mut UpdateState,
    spec: &ModelSpec,
    params: &mut ParameterVector,
    batch: &Batch,
    kind: FairObjectiveKind,
) -> Result<StepReport> {
    let (direction, report) = vfair_direction(state, spec, params, batch, kind)?;
    params.axpy(-state.step_size, &direction);
    Ok(report)
}

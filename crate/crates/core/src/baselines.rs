//! ERM and chi-square DRO baselines.
//!
//! DRO minimizes the dual form
//!
//! ```text
//! F(theta; eta) = C * sqrt(E[(l - eta)_+^2]) + eta,   C = sqrt(2 (1/alpha_min - 1)^2 + 1)
//! ```
//!
//! over `eta` per batch, then descends `theta` with `eta` held at the
//! minimizer. The resulting gradient is the weighted form
//! `C * E[(l - eta)_+ dl] / sqrt(E[(l - eta)_+^2])`.

use serde::{Deserialize, Serialize};

use crate::nnet::{forward_pass, grad_mean, Batch, LossVector, ModelSpec, ParameterVector};
use crate::{Error, Result};

/// `params <- params - step_size * grad_mu`.
pub fn erm_step(spec: &ModelSpec, params: &mut ParameterVector, batch: &Batch, step_size: f64) -> Result<()> {
    let g = grad_mean(spec, params, batch)?;
    params.axpy(-step_size, &g);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DroConfig {
    /// Lower bound on the share of the worst-off group.
    pub alpha_min: f64,
    #[serde(default = "default_eta_tol")]
    pub eta_search_tol: f64,
    #[serde(default = "default_eta_pad")]
    pub eta_bracket_pad: f64,
}

fn default_eta_tol() -> f64 {
    1e-6
}

fn default_eta_pad() -> f64 {
    1.0
}

impl DroConfig {
    pub fn new(alpha_min: f64) -> Result<Self> {
        let cfg = DroConfig {
            alpha_min,
            eta_search_tol: default_eta_tol(),
            eta_bracket_pad: default_eta_pad(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_min > 0.0 && self.alpha_min < 1.0) {
            return Err(Error::Config(format!("alpha_min must lie in (0, 1), got {}", self.alpha_min)));
        }
        if !(self.eta_search_tol > 0.0) || !(self.eta_bracket_pad >= 0.0) {
            return Err(Error::Config("eta search tolerance must be > 0 and padding >= 0".into()));
        }
        Ok(())
    }

    /// `C = sqrt(2 (1/alpha_min - 1)^2 + 1)`
    pub fn constant(&self) -> f64 {
        let r = 1.0 / self.alpha_min - 1.0;
        (2.0 * r * r + 1.0).sqrt()
    }

    /// `F(eta)` on a loss vector.
    pub fn objective(&self, losses: &[f64], eta: f64) -> f64 {
        let n = losses.len() as f64;
        let tail = losses.iter().map(|l| (l - eta).max(0.0).powi(2)).sum::<f64>() / n;
        self.constant() * tail.sqrt() + eta
    }
}

/// Minimizer of the convex `F(eta)` over `[min l - pad, max l + pad]` by
/// ternary search to `eta_search_tol`.
pub fn dro_eta(losses: &LossVector, cfg: &DroConfig) -> Result<f64> {
    if losses.is_empty() {
        return Err(Error::Data("DRO needs a non-empty loss vector".into()));
    }
    let l = losses.as_slice();
    let (mut lo, mut hi) = (losses.min() - cfg.eta_bracket_pad, losses.max() + cfg.eta_bracket_pad);
    while hi - lo > cfg.eta_search_tol {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        // on ties a minimizer lies in [m1, m2]
        if cfg.objective(l, m1) < cfg.objective(l, m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Diagnostics of one DRO update; one row of the DRO step trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DroStepReport {
    pub step: u64,
    pub eta: f64,
    pub objective: f64,
    /// Share of the batch with a loss above `eta`.
    pub active_fraction: f64,
}

/// Gradient of `F(theta; eta*)` at the batch-optimal `eta*`.
///
/// Entries within `eta_search_tol` of `eta*` count as sitting on the kink of
/// the positive part and get weight zero. When no entry is active the
/// gradient is zero.
pub fn dro_gradient(
    spec: &ModelSpec,
    params: &ParameterVector,
    batch: &Batch,
    cfg: &DroConfig,
) -> Result<(ParameterVector, DroStepReport)> {
    let pass = forward_pass(spec, params, batch)?;
    let losses = pass.losses();
    let eta = dro_eta(losses, cfg)?;
    let excess: Vec<f64> = losses
        .as_slice()
        .iter()
        .map(|l| if l - eta > cfg.eta_search_tol { l - eta } else { 0.0 })
        .collect();
    let active = excess.iter().filter(|&&e| e > 0.0).count();
    let report = DroStepReport {
        step: 0,
        eta,
        objective: cfg.objective(losses.as_slice(), eta),
        active_fraction: active as f64 / excess.len() as f64,
    };
    if active == 0 {
        return Ok((ParameterVector::zeros(params.len()), report));
    }
    let tail = excess.iter().map(|e| e * e).sum::<f64>() / excess.len() as f64;
    let mut g = pass.weighted_gradient(&excess)?;
    g = g.scaled(cfg.constant() / tail.sqrt());
    Ok((g, report))
}

pub fn dro_step(
    spec: &ModelSpec,
    params: &mut ParameterVector,
    batch: &Batch,
    cfg: &DroConfig,
    step_size: f64,
) -> Result<DroStepReport> {
    let (g, report) = dro_gradient(spec, params, batch, cfg)?;
    params.axpy(-step_size, &g);
    Ok(report)
}

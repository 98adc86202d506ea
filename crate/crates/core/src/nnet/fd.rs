//! Central finite differences of batch objectives, used as a test oracle for
//! the analytic gradients.

use super::{forward, per_example_losses, Batch, ModelSpec, ParameterVector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub enum FdObjective<'a> {
    /// Batch mean loss.
    Mean,
    /// Batch-centered loss standard deviation `sqrt((1/b) sum (l_i - mean)^2)`.
    Sigma,
    /// `(1/b) sum_i w_i l_i` with fixed weights.
    Weighted(&'a [f64]),
}

pub fn objective_value(
    spec: &ModelSpec,
    params: &ParameterVector,
    batch: &Batch,
    objective: FdObjective<'_>,
) -> Result<f64> {
    let outputs = forward(spec, params, batch)?;
    let losses = per_example_losses(spec, &outputs, &batch.targets)?;
    let l = losses.as_slice();
    let b = l.len() as f64;
    Ok(match objective {
        FdObjective::Mean => losses.mean(),
        FdObjective::Sigma => {
            let m = losses.mean();
            (l.iter().map(|v| (v - m).powi(2)).sum::<f64>() / b).sqrt()
        }
        FdObjective::Weighted(w) => {
            if w.len() != l.len() {
                return Err(Error::Config(format!("{} weights for a batch of {}", w.len(), l.len())));
            }
            l.iter().zip(w).map(|(v, w)| v * w).sum::<f64>() / b
        }
    })
}

/// `(f(theta + h d) - f(theta - h d)) / (2h)`.
pub fn directional_derivative_fd(
    spec: &ModelSpec,
    params: &ParameterVector,
    batch: &Batch,
    objective: FdObjective<'_>,
    direction: &ParameterVector,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be > 0, got {h}")));
    }
    if direction.len() != params.len() {
        return Err(Error::Config("direction and parameters differ in length".into()));
    }
    let plus = objective_value(spec, &params.plus_scaled(h, direction), batch, objective)?;
    let minus = objective_value(spec, &params.plus_scaled(-h, direction), batch, objective)?;
    Ok((plus - minus) / (2.0 * h))
}

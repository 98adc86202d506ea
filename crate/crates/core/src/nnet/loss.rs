//! Per-example task losses and their derivatives with respect to the model
//! output. Classification losses are evaluated in logit space.

use ndarray::{Array2, ArrayView1};

use super::{LossVector, ModelSpec, Task};
use crate::{Error, Result};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn binary_target(target: f64) -> Result<f64> {
    if target == 0.0 || target == 1.0 {
        Ok(target)
    } else {
        Err(Error::Data(format!("binary target must be 0 or 1, got {target}")))
    }
}

fn class_index(target: f64, classes: usize) -> Result<usize> {
    if target >= 0.0 && target.fract() == 0.0 && (target as usize) < classes {
        Ok(target as usize)
    } else {
        Err(Error::Data(format!(
            "class index {target} out of range for {classes} classes"
        )))
    }
}

/// Loss of one example and `d loss / d output`, written into `grad`.
pub(crate) fn loss_and_output_grad(
    task: Task,
    output: ArrayView1<'_, f64>,
    target: f64,
    grad: &mut [f64],
) -> Result<f64> {
    match task {
        Task::RegressionMse => {
            let r = output[0] - target;
            grad[0] = 2.0 * r;
            Ok(r * r)
        }
        Task::BinaryBce => {
            let y = binary_target(target)?;
            let z = output[0];
            grad[0] = sigmoid(z) - y;
            // softplus(z) - y z, stable for large |z|
            Ok(z.max(0.0) - y * z + (-z.abs()).exp().ln_1p())
        }
        Task::LogisticRegressionMse => {
            let y = binary_target(target)?;
            let p = sigmoid(output[0]);
            let r = p - y;
            grad[0] = 2.0 * r * p * (1.0 - p);
            Ok(r * r)
        }
        Task::MulticlassCe => {
            let class = class_index(target, output.len())?;
            let max = output.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = output.iter().map(|z| (z - max).exp()).sum();
            let log_norm = max + sum.ln();
            for (g, z) in grad.iter_mut().zip(output.iter()) {
                *g = (z - log_norm).exp();
            }
            grad[class] -= 1.0;
            Ok((log_norm - output[class]).max(0.0))
        }
    }
}

/// One scalar prediction per example: the regression value, the positive
/// class probability for binary tasks, or the argmax class index.
pub fn point_predictions(task: Task, outputs: &Array2<f64>) -> Vec<f64> {
    outputs
        .rows()
        .into_iter()
        .map(|row| match task {
            Task::RegressionMse => row[0],
            Task::BinaryBce | Task::LogisticRegressionMse => sigmoid(row[0]),
            Task::MulticlassCe => {
                let mut best = 0;
                for (i, v) in row.iter().enumerate() {
                    if *v > row[best] {
                        best = i;
                    }
                }
                best as f64
            }
        })
        .collect()
}

/// Per-example losses of raw model outputs (logits for classification).
pub fn per_example_losses(
    spec: &ModelSpec,
    predictions: &Array2<f64>,
    targets: &[f64],
) -> Result<LossVector> {
    if predictions.nrows() != targets.len() || predictions.ncols() != spec.output_dim {
        return Err(Error::Config(format!(
            "predictions {:?} do not match {} targets with output_dim {}",
            predictions.dim(),
            targets.len(),
            spec.output_dim
        )));
    }
    let mut scratch = vec![0.0; spec.output_dim];
    let losses = predictions
        .rows()
        .into_iter()
        .zip(targets)
        .map(|(row, &t)| loss_and_output_grad(spec.task, row, t, &mut scratch))
        .collect::<Result<Vec<_>>>()?;
    LossVector::new(losses)
}

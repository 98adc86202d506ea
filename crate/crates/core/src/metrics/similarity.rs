use crate::nnet::{ParameterVector, Task};
use crate::{Error, Result};

/// Cosine similarity of two parameter vectors of the same model.
pub fn model_similarity(a: &ParameterVector, b: &ParameterVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Config("parameter vectors of different models".into()));
    }
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        return Err(Error::Numeric("cosine similarity of a zero parameter vector".into()));
    }
    Ok((a.dot(b) / denom).clamp(-1.0, 1.0))
}

fn hard_label(task: Task, point: f64) -> f64 {
    match task {
        Task::BinaryBce | Task::LogisticRegressionMse => {
            if point >= 0.5 {
                1.0
            } else {
                0.0
            }
        }
        _ => point,
    }
}

/// Fraction of examples on which two models predict the same hard label.
///
/// Inputs are point predictions (probabilities or class indices). Plain
/// regression has no hard labels and is rejected.
pub fn prediction_similarity(a: &[f64], b: &[f64], task: Task) -> Result<f64> {
    if task == Task::RegressionMse {
        return Err(Error::Config("prediction agreement needs a classification task".into()));
    }
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Data("prediction vectors must be non-empty and of equal length".into()));
    }
    let same = a
        .iter()
        .zip(b)
        .filter(|(x, y)| hard_label(task, **x) == hard_label(task, **y))
        .count();
    Ok(same as f64 / a.len() as f64)
}

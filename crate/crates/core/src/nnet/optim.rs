use serde::{Deserialize, Serialize};

use super::ParameterVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adagrad,
}

/// First-order update applied to a descent direction.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    step_size: f64,
    accumulator: Vec<f64>,
}

const ADAGRAD_EPS: f64 = 1e-10;

impl Optimizer {
    pub fn new(kind: OptimizerKind, step_size: f64, param_count: usize) -> Self {
        let accumulator = match kind {
            OptimizerKind::Sgd => Vec::new(),
            OptimizerKind::Adagrad => vec![0.0; param_count],
        };
        Optimizer {
            kind,
            step_size,
            accumulator,
        }
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    /// `params -= step * grad` (SGD) or the Adagrad-scaled equivalent.
    pub fn apply(&mut self, params: &mut ParameterVector, grad: &ParameterVector) {
        match self.kind {
            OptimizerKind::Sgd => params.axpy(-self.step_size, grad),
            OptimizerKind::Adagrad => {
                for ((p, g), acc) in params
                    .as_mut_slice()
                    .iter_mut()
                    .zip(grad.as_slice())
                    .zip(&mut self.accumulator)
                {
                    *acc += g * g;
                    *p -= self.step_size * g / (acc.sqrt() + ADAGRAD_EPS);
                }
            }
        }
    }
}

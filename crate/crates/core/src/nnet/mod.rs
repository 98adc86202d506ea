//! Minimal feedforward models with exact manual backpropagation.
//!
//! A model is a chain of dense layers `z = W a + b`. Hidden layers apply the
//! configured activation; the last layer is left linear and the task decides
//! how its output becomes a loss (see [`Task`]). Parameters live in one flat
//! [`ParameterVector`] whose layout is fixed by the [`ModelSpec`]: for each
//! layer, the row-major `(out_dim, in_dim)` weight block followed by the
//! `out_dim` biases.
//!
//! Every gradient in the crate is the gradient of a constant-weighted sum of
//! per-example losses, `(1/b) sum_i w_i l_i`, computed by
//! [`ForwardPass::weighted_gradient`]. The weights are never differentiated.

mod fd;
mod forward;
mod loss;
mod optim;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use fd::{directional_derivative_fd, objective_value, FdObjective};
pub use forward::{forward, forward_pass, grad_mean, weighted_gradient, ForwardPass};
pub use loss::{per_example_losses, point_predictions, sigmoid};
pub use optim::{Optimizer, OptimizerKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    pub(crate) fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation.
    pub(crate) fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Output head and loss of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Squared error on a real-valued output.
    RegressionMse,
    /// Binary cross-entropy on a logit, targets in {0, 1}.
    BinaryBce,
    /// Softmax cross-entropy, targets are class indices.
    MulticlassCe,
    /// Squared error between `sigmoid(logit)` and a {0, 1} target.
    LogisticRegressionMse,
}

impl Task {
    pub fn is_classification(self) -> bool {
        !matches!(self, Task::RegressionMse)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_dim: usize,
    /// Widths of the hidden layers; empty for a linear model.
    #[serde(default)]
    pub hidden_dims: Vec<usize>,
    pub activation: Activation,
    pub output_dim: usize,
    pub task: Task,
}

/// Position of one dense layer inside a [`ParameterVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSlot {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl LayerSlot {
    pub fn end(&self) -> usize {
        self.bias_offset + self.out_dim
    }
}

impl ModelSpec {
    pub fn new(
        input_dim: usize,
        hidden_dims: Vec<usize>,
        activation: Activation,
        output_dim: usize,
        task: Task,
    ) -> Result<Self> {
        let spec = ModelSpec {
            input_dim,
            hidden_dims,
            activation,
            output_dim,
            task,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Linear model `y = w x + b` for the given task.
    pub fn linear(input_dim: usize, task: Task) -> Result<Self> {
        let output_dim = match task {
            Task::MulticlassCe => {
                return Err(Error::Config(
                    "multiclass linear model needs an explicit output_dim".into(),
                ))
            }
            _ => 1,
        };
        Self::new(input_dim, Vec::new(), Activation::Identity, output_dim, task)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::Config("layer dims must be > 0".into()));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::Config("hidden layer widths must be > 0".into()));
        }
        match self.task {
            Task::MulticlassCe if self.output_dim < 2 => Err(Error::Config(
                "multiclass_ce needs output_dim >= 2".into(),
            )),
            Task::RegressionMse | Task::BinaryBce | Task::LogisticRegressionMse
                if self.output_dim != 1 =>
            {
                Err(Error::Config(format!(
                    "{:?} needs output_dim = 1, got {}",
                    self.task, self.output_dim
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn layout(&self) -> Vec<LayerSlot> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.output_dim);
        let mut offset = 0;
        dims.windows(2)
            .map(|w| {
                let slot = LayerSlot {
                    in_dim: w[0],
                    out_dim: w[1],
                    weight_offset: offset,
                    bias_offset: offset + w[0] * w[1],
                };
                offset = slot.end();
                slot
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layout().last().map_or(0, LayerSlot::end)
    }

    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and biases.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParameterVector {
        let mut values = vec![0.0; self.param_count()];
        for slot in self.layout() {
            let bound = 1.0 / (slot.in_dim as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            for v in &mut values[slot.weight_offset..slot.end()] {
                *v = dist.sample(rng);
            }
        }
        ParameterVector(values)
    }

    pub fn zero_params(&self) -> ParameterVector {
        ParameterVector::zeros(self.param_count())
    }

    pub(crate) fn check_params(&self, params: &ParameterVector) -> Result<()> {
        let expected = self.param_count();
        if params.len() != expected {
            return Err(Error::Config(format!(
                "parameter vector has {} entries, model expects {expected}",
                params.len()
            )));
        }
        Ok(())
    }
}

/// Flat model parameters, index-aligned with every gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn zeros(len: usize) -> Self {
        ParameterVector(vec![0.0; len])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        ParameterVector(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &ParameterVector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: f64, x: &ParameterVector) {
        debug_assert_eq!(self.len(), x.len());
        for (s, v) in self.0.iter_mut().zip(&x.0) {
            *s += alpha * v;
        }
    }

    pub fn scaled(&self, alpha: f64) -> ParameterVector {
        ParameterVector(self.0.iter().map(|v| alpha * v).collect())
    }

    /// `self + alpha * x` as a new vector.
    pub fn plus_scaled(&self, alpha: f64, x: &ParameterVector) -> ParameterVector {
        let mut out = self.clone();
        out.axpy(alpha, x);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// A mini-batch of preprocessed examples.
#[derive(Debug, Clone)]
pub struct Batch {
    pub features: Array2<f64>,
    /// Real target for regression, `0`/`1` for binary tasks, class index for
    /// multiclass.
    pub targets: Vec<f64>,
    pub example_ids: Vec<usize>,
}

impl Batch {
    pub fn new(features: Array2<f64>, targets: Vec<f64>, example_ids: Vec<usize>) -> Result<Self> {
        let b = features.nrows();
        if b == 0 {
            return Err(Error::Data("batch must contain at least one example".into()));
        }
        if targets.len() != b || example_ids.len() != b {
            return Err(Error::Data(format!(
                "batch has {b} feature rows, {} targets and {} ids",
                targets.len(),
                example_ids.len()
            )));
        }
        if features.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::Data("batch contains non-finite values".into()));
        }
        Ok(Batch {
            features,
            targets,
            example_ids,
        })
    }

    /// Builds a batch from row slices with ids `0..b`.
    pub fn from_rows(rows: &[Vec<f64>], targets: Vec<f64>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Data("ragged feature rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let features = Array2::from_shape_vec((rows.len(), dim), flat)
            .map_err(|e| Error::Data(e.to_string()))?;
        let ids = (0..rows.len()).collect();
        Batch::new(features, targets, ids)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Sub-batch made of the given row positions.
    pub fn select(&self, rows: &[usize]) -> Result<Batch> {
        let features = self.features.select(ndarray::Axis(0), rows);
        let targets = rows.iter().map(|&r| self.targets[r]).collect();
        let ids = rows.iter().map(|&r| self.example_ids[r]).collect();
        Batch::new(features, targets, ids)
    }
}

/// Per-example losses of one batch; every entry is finite and `>= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LossVector(Vec<f64>);

impl LossVector {
    pub fn new(losses: Vec<f64>) -> Result<Self> {
        if let Some(bad) = losses.iter().find(|l| !l.is_finite()) {
            return Err(Error::Numeric(format!("non-finite loss {bad}")));
        }
        if let Some(neg) = losses.iter().find(|&&l| l < 0.0) {
            return Err(Error::Numeric(format!("negative loss {neg}")));
        }
        Ok(LossVector(losses))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Batch mean; `NaN` for an empty vector.
    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

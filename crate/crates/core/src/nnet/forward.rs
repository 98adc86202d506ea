use ndarray::{Array2, ArrayView2, Axis};

use super::loss::loss_and_output_grad;
use super::{Batch, LayerSlot, LossVector, ModelSpec, ParameterVector};
use crate::{Error, Result};

fn weight_view<'a>(params: &'a ParameterVector, slot: &LayerSlot) -> ArrayView2<'a, f64> {
    let data = &params.as_slice()[slot.weight_offset..slot.bias_offset];
    ArrayView2::from_shape((slot.out_dim, slot.in_dim), data).expect("layout matches slot")
}

/// Cached activations of one forward evaluation, reusable for any number of
/// weighted backward passes.
#[derive(Debug)]
pub struct ForwardPass<'a> {
    spec: &'a ModelSpec,
    params: &'a ParameterVector,
    layout: Vec<LayerSlot>,
    /// `inputs[l]` feeds layer `l`; `inputs[0]` is the feature matrix.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of every layer; the last entry is the model output.
    pre: Vec<Array2<f64>>,
    losses: LossVector,
    /// `d loss_i / d output_i`, one row per example.
    output_grads: Array2<f64>,
}

/// Runs the model on a batch and caches what backpropagation needs.
pub fn forward_pass<'a>(
    spec: &'a ModelSpec,
    params: &'a ParameterVector,
    batch: &Batch,
) -> Result<ForwardPass<'a>> {
    let (layout, inputs, pre) = run_layers(spec, params, batch)?;
    let outputs = pre.last().expect("at least one layer");
    let mut output_grads = Array2::zeros(outputs.raw_dim());
    let mut losses = Vec::with_capacity(batch.len());
    for ((row, &target), mut grad) in outputs
        .rows()
        .into_iter()
        .zip(&batch.targets)
        .zip(output_grads.rows_mut())
    {
        let g = grad.as_slice_mut().expect("row-major output grads");
        losses.push(loss_and_output_grad(spec.task, row, target, g)?);
    }
    let losses = LossVector::new(losses)?;
    Ok(ForwardPass {
        spec,
        params,
        layout,
        inputs,
        pre,
        losses,
        output_grads,
    })
}

type LayerCache = (Vec<LayerSlot>, Vec<Array2<f64>>, Vec<Array2<f64>>);

fn run_layers(spec: &ModelSpec, params: &ParameterVector, batch: &Batch) -> Result<LayerCache> {
    spec.check_params(params)?;
    if batch.features.ncols() != spec.input_dim {
        return Err(Error::Config(format!(
            "batch has {} features, model expects {}",
            batch.features.ncols(),
            spec.input_dim
        )));
    }
    let layout = spec.layout();
    let mut inputs = vec![batch.features.clone()];
    let mut pre = Vec::with_capacity(layout.len());
    for (l, slot) in layout.iter().enumerate() {
        let w = weight_view(params, slot);
        let bias = &params.as_slice()[slot.bias_offset..slot.end()];
        let mut z = inputs[l].dot(&w.t());
        for mut row in z.rows_mut() {
            for (v, b) in row.iter_mut().zip(bias) {
                *v += b;
            }
        }
        if l + 1 < layout.len() {
            inputs.push(z.mapv(|v| spec.activation.apply(v)));
        }
        pre.push(z);
    }
    Ok((layout, inputs, pre))
}

impl ForwardPass<'_> {
    /// Raw model outputs (logits for classification tasks).
    pub fn outputs(&self) -> &Array2<f64> {
        self.pre.last().expect("at least one layer")
    }

    pub fn losses(&self) -> &LossVector {
        &self.losses
    }

    /// Gradient of `(1/b) sum_i weights[i] * loss_i` with the weights held
    /// constant.
    pub fn weighted_gradient(&self, weights: &[f64]) -> Result<ParameterVector> {
        let b = self.losses.len();
        if weights.len() != b {
            return Err(Error::Config(format!(
                "{} weights for a batch of {b}",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numeric("non-finite example weight".into()));
        }
        let mut grad = ParameterVector::zeros(self.params.len());
        let mut delta = self.output_grads.clone();
        for (mut row, w) in delta.rows_mut().into_iter().zip(weights) {
            row *= w / b as f64;
        }
        for l in (0..self.layout.len()).rev() {
            let slot = &self.layout[l];
            let dw = delta.t().dot(&self.inputs[l]);
            let db = delta.sum_axis(Axis(0));
            let g = grad.as_mut_slice();
            g[slot.weight_offset..slot.bias_offset]
                .copy_from_slice(dw.as_standard_layout().as_slice().expect("contiguous"));
            g[slot.bias_offset..slot.end()].copy_from_slice(db.as_slice().expect("contiguous"));
            if l > 0 {
                let w = weight_view(self.params, slot);
                let mut upstream = delta.dot(&w);
                let act = self.spec.activation;
                upstream.zip_mut_with(&self.pre[l - 1], |d, &z| *d *= act.derivative(z));
                delta = upstream;
            }
        }
        Ok(grad)
    }
}

/// Raw model outputs for a batch.
pub fn forward(spec: &ModelSpec, params: &ParameterVector, batch: &Batch) -> Result<Array2<f64>> {
    let (_, _, mut pre) = run_layers(spec, params, batch)?;
    Ok(pre.pop().expect("at least one layer"))
}

/// `grad (1/b) sum_i weights[i] * loss_i(params)`.
pub fn weighted_gradient(
    spec: &ModelSpec,
    params: &ParameterVector,
    batch: &Batch,
    weights: &[f64],
) -> Result<ParameterVector> {
    forward_pass(spec, params, batch)?.weighted_gradient(weights)
}

/// Gradient of the batch mean loss.
pub fn grad_mean(spec: &ModelSpec, params: &ParameterVector, batch: &Batch) -> Result<ParameterVector> {
    let pass = forward_pass(spec, params, batch)?;
    pass.weighted_gradient(&vec![1.0; batch.len()])
}

use super::{LayerParams, LayerSpec, NetworkParams, NetworkSpec};
use crate::activations::{apply_map_backward, apply_map_forward, Granularity};
use crate::error::{Error, Result};
use crate::tensor::{
    affine_backward, affine_forward, conv2d_backward, conv2d_forward, flatten, maxpool_backward, maxpool_forward,
    PoolIndices, Tensor,
};

/// Lower clamp on probabilities inside the log of the cross-entropy.
pub const PROB_FLOOR: f64 = 1e-12;

/// Intermediates recorded by [`forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Input to each layer.
    inputs: Vec<Tensor>,
    /// Pre-activation output of each FC hidden layer.
    fc_pre: Vec<Option<Tensor>>,
    pools: Vec<Option<PoolIndices>>,
    probs: Tensor,
}

impl ForwardCache {
    pub fn probabilities(&self) -> &Tensor {
        &self.probs
    }

    /// Input tensor seen by layer `i`.
    pub fn layer_input(&self, i: usize) -> &Tensor {
        &self.inputs[i]
    }
}

fn dense(params: &NetworkParams, i: usize) -> Result<&crate::tensor::Dense> {
    match params.layer(i) {
        LayerParams::Dense(d) => Ok(d),
        _ => Err(Error::Internal(format!("layer {i} has no dense parameters"))),
    }
}

fn conv(params: &NetworkParams, i: usize) -> Result<&crate::tensor::FilterBank> {
    match params.layer(i) {
        LayerParams::Conv(f) => Ok(f),
        _ => Err(Error::Internal(format!("layer {i} has no filter bank"))),
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let k = logits.features();
    let mut out = logits.clone();
    for row in out.data_mut().chunks_mut(k) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Class probabilities `(batch, classes)` and the cached intermediates.
pub fn forward(spec: &NetworkSpec, params: &NetworkParams, batch: &Tensor) -> Result<(Tensor, ForwardCache)> {
    let [c, h, w] = spec.input_shape();
    if batch.shape()[1..] != [c, h, w] {
        return Err(Error::dim("forward", [batch.batch(), c, h, w], batch.shape()));
    }
    params.check_against(spec)?;
    let n = spec.layers().len();
    let mut inputs = Vec::with_capacity(n);
    let mut fc_pre = vec![None; n];
    let mut pools = vec![None; n];
    let mut x = batch.clone();
    for (i, layer) in spec.layers().iter().enumerate() {
        let next = match layer {
            LayerSpec::Conv { stride, padding, .. } => conv2d_forward(&x, conv(params, i)?, *stride, *padding)?,
            LayerSpec::Act(map) => apply_map_forward(&x, map, Granularity::PerChannel)?,
            LayerSpec::Pool { window, stride } => {
                let (y, idx) = maxpool_forward(&x, *window, *stride)?;
                pools[i] = Some(idx);
                y
            }
            LayerSpec::Flatten => flatten(&x),
            LayerSpec::Fc { map, .. } => {
                let d = dense(params, i)?;
                let z = affine_forward(&x, &d.weights, &d.bias)?;
                let a = apply_map_forward(&z, map, Granularity::PerNeuron)?;
                fc_pre[i] = Some(z);
                a
            }
            LayerSpec::SoftmaxHead { .. } => {
                let d = dense(params, i)?;
                softmax_rows(&affine_forward(&x, &d.weights, &d.bias)?)
            }
        };
        inputs.push(std::mem::replace(&mut x, next));
    }
    let cache = ForwardCache {
        inputs,
        fc_pre,
        pools,
        probs: x.clone(),
    };
    Ok((x, cache))
}

/// Argmax class per row; ties go to the lowest class index.
pub fn predict(spec: &NetworkSpec, params: &NetworkParams, batch: &Tensor) -> Result<Vec<usize>> {
    let (probs, _) = forward(spec, params, batch)?;
    Ok(argmax_rows(&probs))
}

pub(crate) fn argmax_rows(probs: &Tensor) -> Vec<usize> {
    let k = probs.features();
    probs
        .data()
        .chunks(k)
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Mean cross-entropy `-mean(ln max(p[label], 1e-12))` and its gradient with
/// respect to every parameter.
pub fn loss_and_backward(
    spec: &NetworkSpec,
    params: &NetworkParams,
    batch: &Tensor,
    labels: &[usize],
) -> Result<(f64, NetworkParams)> {
    let classes = spec.classes();
    if labels.len() != batch.batch() {
        return Err(Error::Data(format!(
            "{} labels for a batch of {}",
            labels.len(),
            batch.batch()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Data(format!("label {bad} out of range for {classes} classes")));
    }
    let (probs, cache) = forward(spec, params, batch)?;
    let n = labels.len();
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut grad = probs.clone();
    for (b, &label) in labels.iter().enumerate() {
        loss -= probs.get(b, label, 0, 0).max(PROB_FLOOR).ln();
        let row = &mut grad.data_mut()[b * classes..(b + 1) * classes];
        row[label] -= 1.0;
        row.iter_mut().for_each(|g| *g *= inv_n);
    }
    loss *= inv_n;
    let grads = backward_from_logits(spec, params, &cache, grad)?;
    Ok((loss, grads))
}

/// Backpropagates a gradient with respect to the head logits.
fn backward_from_logits(
    spec: &NetworkSpec,
    params: &NetworkParams,
    cache: &ForwardCache,
    logits_grad: Tensor,
) -> Result<NetworkParams> {
    let mut grads = NetworkParams::zeros_like(spec);
    let mut g = logits_grad;
    for (i, layer) in spec.layers().iter().enumerate().rev() {
        let input = &cache.inputs[i];
        g = match layer {
            LayerSpec::SoftmaxHead { .. } => {
                let d = dense(params, i)?;
                let gp = affine_backward(input, &d.weights, &g)?;
                *grads.layer_mut(i) = LayerParams::Dense(gp.params);
                gp.input
            }
            LayerSpec::Fc { map, .. } => {
                let d = dense(params, i)?;
                let pre = cache.fc_pre[i]
                    .as_ref()
                    .ok_or_else(|| Error::Internal(format!("missing FC cache at layer {i}")))?;
                let gz = apply_map_backward(pre, map, &g, Granularity::PerNeuron)?;
                let gp = affine_backward(input, &d.weights, &gz)?;
                *grads.layer_mut(i) = LayerParams::Dense(gp.params);
                gp.input
            }
            LayerSpec::Flatten => g.reshape(input.shape())?,
            LayerSpec::Pool { .. } => {
                let idx = cache.pools[i]
                    .as_ref()
                    .ok_or_else(|| Error::Internal(format!("missing pool indices at layer {i}")))?;
                maxpool_backward(idx, &g)?
            }
            LayerSpec::Act(map) => apply_map_backward(input, map, &g, Granularity::PerChannel)?,
            LayerSpec::Conv { stride, padding, .. } => {
                let gp = conv2d_backward(input, conv(params, i)?, &g, *stride, *padding)?;
                *grads.layer_mut(i) = LayerParams::Conv(gp.params);
                gp.input
            }
        };
    }
    Ok(grads)
}

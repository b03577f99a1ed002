use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LayerSpec, NetworkSpec};
use crate::error::{Error, Result};
use crate::tensor::{Dense, FilterBank};

#[derive(Clone, Debug, PartialEq)]
pub enum LayerParams {
    None,
    Conv(FilterBank),
    Dense(Dense),
}

/// Parameters for every layer of a spec, index-aligned with `spec.layers()`.
/// Gradients use the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    layers: Vec<LayerParams>,
    seed: u64,
}

impl NetworkParams {
    pub fn zeros_like(spec: &NetworkSpec) -> Self {
        let shapes = spec.shapes();
        let layers = spec
            .layers()
            .iter()
            .enumerate()
            .map(|(i, layer)| {
                let input = if i == 0 { spec.input_shape() } else { shapes[i - 1] };
                match layer {
                    LayerSpec::Conv {
                        out_channels, kernel, ..
                    } => LayerParams::Conv(FilterBank::zeros(*out_channels, input[0], *kernel)),
                    LayerSpec::Fc { out_neurons, .. } => LayerParams::Dense(Dense::zeros(input[0], *out_neurons)),
                    LayerSpec::SoftmaxHead { classes } => LayerParams::Dense(Dense::zeros(input[0], *classes)),
                    _ => LayerParams::None,
                }
            })
            .collect();
        NetworkParams { layers, seed: 0 }
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> &LayerParams {
        &self.layers[i]
    }

    pub(crate) fn layer_mut(&mut self, i: usize) -> &mut LayerParams {
        &mut self.layers[i]
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// All parameter buffers in layer order: weights then biases.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for l in &self.layers {
            match l {
                LayerParams::Conv(f) => {
                    out.push(f.weights().data());
                    out.push(f.biases());
                }
                LayerParams::Dense(d) => {
                    out.push(d.weights.data());
                    out.push(&d.bias[..]);
                }
                LayerParams::None => {}
            }
        }
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            match l {
                LayerParams::Conv(f) => {
                    let (weights, biases) = f.split_mut();
                    out.push(weights);
                    out.push(biases);
                }
                LayerParams::Dense(d) => {
                    out.push(d.weights.data_mut());
                    out.push(&mut d.bias[..]);
                }
                LayerParams::None => {}
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    /// Every parameter value, flattened in [`NetworkParams::slices`] order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.slices().concat()
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &NetworkParams) -> Result<()> {
        let src = other.slices();
        let mut dst = self.slices_mut();
        if src.len() != dst.len() || src.iter().zip(&dst).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::dim(
                "NetworkParams::axpy",
                "parameter layout",
                "mismatched layout",
            ));
        }
        for (d, s) in dst.iter_mut().zip(src) {
            for (x, y) in d.iter_mut().zip(s) {
                *x += alpha * y;
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

/// Zero-mean uniform weights with variance `2/fan_in` when the layer feeds a
/// map whose slots are mostly REL/ELU, `1/fan_in` otherwise. Biases start at zero.
pub fn init_params(spec: &NetworkSpec, seed: u64) -> NetworkParams {
    let mut params = NetworkParams::zeros_like(spec);
    params.seed = seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = spec.layers();
    for (i, layer) in layers.iter().enumerate() {
        let gain = match layer {
            LayerSpec::Conv { .. } => match layers.get(i + 1) {
                Some(LayerSpec::Act(map)) if map.rectifier_majority() => 2.0,
                _ => 1.0,
            },
            LayerSpec::Fc { map, .. } if map.rectifier_majority() => 2.0,
            _ => 1.0,
        };
        let (weights, fan_in): (&mut [f64], usize) = match params.layer_mut(i) {
            LayerParams::Conv(f) => {
                let fan_in = f.in_channels() * f.kernel() * f.kernel();
                (f.weights_mut().data_mut(), fan_in)
            }
            LayerParams::Dense(d) => {
                let fan_in = d.weights.rows();
                (d.weights.data_mut(), fan_in)
            }
            LayerParams::None => continue,
        };
        // U(-a, a) has variance a^2 / 3.
        let bound = (3.0 * gain / fan_in as f64).sqrt();
        for w in weights.iter_mut() {
            *w = rng.gen_range(-bound..bound);
        }
    }
    params
}

/// Convenience for tests and tools that build parameters by hand.
impl NetworkParams {
    pub fn from_layers(layers: Vec<LayerParams>, seed: u64) -> Self {
        NetworkParams { layers, seed }
    }

    /// Checks that parameter shapes match shape inference over the network's layers.
    pub fn check_against(&self, spec: &NetworkSpec) -> Result<()> {
        let reference = NetworkParams::zeros_like(spec);
        let ok = reference.layers.len() == self.layers.len()
            && reference.layers.iter().zip(&self.layers).all(|(a, b)| match (a, b) {
                (LayerParams::None, LayerParams::None) => true,
                (LayerParams::Conv(x), LayerParams::Conv(y)) => {
                    x.weights().shape() == y.weights().shape() && x.biases().len() == y.biases().len()
                }
                (LayerParams::Dense(x), LayerParams::Dense(y)) => {
                    x.weights.rows() == y.weights.rows()
                        && x.weights.cols() == y.weights.cols()
                        && x.bias.len() == y.bias.len()
                }
                _ => false,
            });
        if ok {
            Ok(())
        } else {
            Err(Error::dim(
                "NetworkParams",
                "spec parameter layout",
                "supplied parameters",
            ))
        }
    }
}

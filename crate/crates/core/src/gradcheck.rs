//! Central finite-difference checks for networks and inception blocks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::activations::{ActivationKind, ActivationMap};
use crate::error::Result;
use crate::inception::{
    block_backward, block_forward, build_inception_a, init_block_params, BlockParams, InceptionBlock,
};
use crate::network::{init_params, loss_and_backward, LayerSpec, NetworkParams, NetworkSpec};
use crate::tensor::Tensor;

/// Step used for central differences.
pub const STEP: f64 = 1e-5;

/// Denominator floor so that near-zero gradients are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub instances: usize,
    pub parameters: usize,
    pub max_rel_error: f64,
}

/// Largest relative error between backprop and central differences of the
/// mean cross-entropy over every parameter.
pub fn check_network(spec: &NetworkSpec, params: &NetworkParams, batch: &Tensor, labels: &[usize]) -> Result<f64> {
    let (_, grads) = loss_and_backward(spec, params, batch, labels)?;
    let analytic = grads.to_flat();
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    let mut flat = 0;
    let buffers = probe.slices().iter().map(|s| s.len()).collect::<Vec<_>>();
    for (b, len) in buffers.into_iter().enumerate() {
        for i in 0..len {
            let orig = probe.slices()[b][i];
            probe.slices_mut()[b][i] = orig + STEP;
            let up = loss_and_backward(spec, &probe, batch, labels)?.0;
            probe.slices_mut()[b][i] = orig - STEP;
            let down = loss_and_backward(spec, &probe, batch, labels)?.0;
            probe.slices_mut()[b][i] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            worst = worst.max(relative_error(analytic[flat], numeric));
            flat += 1;
        }
    }
    Ok(worst)
}

/// Checks `sum(weights * block(input))` against every filter parameter and input element.
pub fn check_block(block: &InceptionBlock, params: &BlockParams, input: &Tensor, seed: u64) -> Result<f64> {
    let out = block_forward(block, params, input)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = Tensor::from_fn(out.shape(), |_, _, _, _| rng.gen_range(-1.0..1.0));
    let objective = |p: &BlockParams, x: &Tensor| -> Result<f64> {
        let y = block_forward(block, p, x)?;
        Ok(y.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum())
    };
    let grads = block_backward(block, params, input, &weights)?;
    let mut worst: f64 = 0.0;

    let analytic: Vec<f64> = grads.params.slices().concat();
    let mut probe = params.clone();
    let lens: Vec<usize> = probe.slices().iter().map(|s| s.len()).collect();
    let mut flat = 0;
    for (b, len) in lens.into_iter().enumerate() {
        for i in 0..len {
            let orig = probe.slices()[b][i];
            probe.slices_mut()[b][i] = orig + STEP;
            let up = objective(&probe, input)?;
            probe.slices_mut()[b][i] = orig - STEP;
            let down = objective(&probe, input)?;
            probe.slices_mut()[b][i] = orig;
            worst = worst.max(relative_error(analytic[flat], (up - down) / (2.0 * STEP)));
            flat += 1;
        }
    }

    let mut x = input.clone();
    for i in 0..x.len() {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + STEP;
        let up = objective(params, &x)?;
        x.data_mut()[i] = orig - STEP;
        let down = objective(params, &x)?;
        x.data_mut()[i] = orig;
        worst = worst.max(relative_error(grads.input.data()[i], (up - down) / (2.0 * STEP)));
    }
    Ok(worst)
}

/// Two conv blocks with heterogeneous maps on a 6x6 input, one of each
/// activation function somewhere in the network.
pub fn sample_network(seed: u64) -> Result<NetworkSpec> {
    use ActivationKind::*;
    let map = |k: &[ActivationKind]| ActivationMap::new(k.to_vec());
    NetworkSpec::new(
        [1, 6, 6],
        vec![
            LayerSpec::Conv {
                out_channels: 2,
                kernel: 3,
                stride: 1,
                padding: 1,
            },
            LayerSpec::Act(map(&[Rel, Sig])?),
            LayerSpec::pool(2),
            LayerSpec::conv(4, 2),
            LayerSpec::Act(map(&[Tan, Pls, Sgn, ActivationKind::ELU])?),
            LayerSpec::Flatten,
            LayerSpec::Fc {
                out_neurons: 3,
                map: map(&[Lin, Elu(crate::activations::EluAlpha::new(0.5)?), Tan])?,
            },
            LayerSpec::SoftmaxHead { classes: 3 },
        ],
        seed,
    )
}

/// Network-level and inception-block checks on seeded instances.
pub fn run_suite(instances: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = CheckReport {
        name: "network (conv, pool, FC, softmax head)".into(),
        instances,
        parameters: 0,
        max_rel_error: 0.0,
    };
    for _ in 0..instances {
        let s = rng.gen();
        let spec = sample_network(s)?;
        let mut params = init_params(&spec, s);
        jitter_biases(params.slices_mut().into_iter().skip(1).step_by(2), &mut rng);
        let batch = Tensor::from_fn([2, 1, 6, 6], |_, _, _, _| rng.gen_range(-1.0..1.0));
        let labels = [rng.gen_range(0..3), rng.gen_range(0..3)];
        net.parameters = params.param_count();
        net.max_rel_error = net.max_rel_error.max(check_network(&spec, &params, &batch, &labels)?);
    }
    let mut inc = CheckReport {
        name: "inception block".into(),
        instances,
        parameters: 0,
        max_rel_error: 0.0,
    };
    for _ in 0..instances {
        let kinds: Vec<ActivationKind> = (0..4).map(|_| ActivationKind::ALL[rng.gen_range(0..7)]).collect();
        let block = build_inception_a(2, 1.0 / 64.0, &kinds)?;
        let (r, params, _) = tiny_block_instance(&block, rng.gen())?;
        inc.parameters = params.slices().iter().map(|s| s.len()).sum();
        inc.max_rel_error = inc.max_rel_error.max(r);
    }
    Ok(vec![net, inc])
}

/// Zero biases put pre-activations behind a dead REL exactly on the kink;
/// small random biases move them off it.
fn jitter_biases<'a>(biases: impl Iterator<Item = &'a mut [f64]>, rng: &mut ChaCha8Rng) {
    for b in biases.flat_map(|s| s.iter_mut()) {
        *b = rng.gen_range(-0.2..0.2);
    }
}

/// Seeded parameters and an 8x8 input for a block, plus its check result.
pub fn tiny_block_instance(block: &InceptionBlock, seed: u64) -> Result<(f64, BlockParams, Tensor)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = init_block_params(block, seed);
    jitter_biases(params.slices_mut().into_iter().skip(1).step_by(2), &mut rng);
    // evenly spaced values keep max-pool windows away from ties
    let n = block.in_channels() * 64;
    let mut values: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / n as f64).collect();
    values.shuffle(&mut rng);
    let input = Tensor::new([1, block.in_channels(), 8, 8], values)?;
    let r = check_block(block, &params, &input, seed ^ 0x5eed)?;
    Ok((r, params, input))
}

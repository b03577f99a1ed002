mod common;

use common::*;
use mcnn::activations::{apply_map_forward, ActivationKind, ActivationMap, EluAlpha, Granularity};
use mcnn::gradcheck::sample_network;
use mcnn::model_space::Topology;
use mcnn::network::{forward, init_params, shape_infer, softmax_rows, NetworkSpec};
use mcnn::tensor::Tensor;
use proptest::prelude::*;
use rand::Rng;

fn all_kinds() -> Vec<ActivationKind> {
    let mut kinds = ActivationKind::ALL.to_vec();
    kinds.push(ActivationKind::Elu(EluAlpha::new(0.3).unwrap()));
    kinds
}

#[test]
fn activations_are_monotone_on_grid() {
    let grid: Vec<f64> = (0..1000).map(|i| -10.0 + 20.0 * i as f64 / 999.0).collect();
    for kind in all_kinds() {
        let ys: Vec<f64> = grid.iter().map(|&x| kind.eval(x)).collect();
        assert!(ys.windows(2).all(|w| w[0] <= w[1]), "{kind} not monotone");
    }
}

#[test]
fn activation_ranges_on_grid() {
    use ActivationKind::*;
    let grid = (0..1000).map(|i| -10.0 + 20.0 * i as f64 / 999.0);
    for x in grid {
        assert!(Sig.eval(x) > 0.0 && Sig.eval(x) < 1.0);
        assert!(Tan.eval(x) > -1.0 && Tan.eval(x) < 1.0);
        assert!(Sgn.eval(x) > -1.0 && Sgn.eval(x) < 1.0);
        assert!(Rel.eval(x) >= 0.0);
        assert!(Pls.eval(x) > 0.0);
    }
}

#[test]
fn activation_derivatives_match_differences() {
    for kind in all_kinds() {
        for seed in 0..4 {
            let e = activation_op_error(kind, seed);
            assert!(e < 1e-5, "{kind} seed {seed}: {e}");
        }
    }
}

#[test]
fn uniform_map_is_scalar_broadcast() {
    let mut r = rng(5);
    let x = random_tensor(&mut r, [2, 3, 4, 4]);
    for kind in all_kinds() {
        let out = apply_map_forward(&x, &ActivationMap::uniform(kind, 3).unwrap(), Granularity::PerChannel).unwrap();
        let want: Vec<f64> = x.data().iter().map(|&v| kind.eval(v)).collect();
        assert_eq!(out.data(), &want[..]);
    }
}

#[test]
fn changing_one_slot_changes_only_that_neuron() {
    use ActivationKind::*;
    let mut r = rng(9);
    let x = Tensor::from_rows(3, 4, uniform_vec(&mut r, 12, -2.0, 2.0)).unwrap();
    let base = ActivationMap::new(vec![Rel, Sig, Tan, Sgn]).unwrap();
    let before = apply_map_forward(&x, &base, Granularity::PerNeuron).unwrap();
    for slot in 0..4 {
        let mut slots = base.slots().to_vec();
        slots[slot] = Pls;
        let after = apply_map_forward(&x, &ActivationMap::new(slots).unwrap(), Granularity::PerNeuron).unwrap();
        for b in 0..3 {
            for j in 0..4 {
                let same = before.get(b, j, 0, 0) == after.get(b, j, 0, 0);
                assert_eq!(same, j != slot, "slot {slot}, neuron {j}");
            }
        }
    }
}

#[test]
fn network_gradient_covers_every_activation() {
    for seed in 0..5 {
        let spec = sample_network(seed).unwrap();
        let mut r = rng(seed);
        let mut params = init_params(&spec, seed);
        for b in params.slices_mut().into_iter().skip(1).step_by(2) {
            b.iter_mut().for_each(|v| *v = r.gen_range(-0.2..0.2));
        }
        let batch = random_tensor(&mut r, [2, 1, 6, 6]);
        let e = network_param_error(&spec, &params, &batch, &[0, 2]);
        assert!(e < 1e-4, "seed {seed}: {e}");
    }
}

#[test]
fn forward_is_deterministic() {
    let spec = sample_network(4).unwrap();
    let params = init_params(&spec, 4);
    let batch = random_tensor(&mut rng(1), [3, 1, 6, 6]);
    let (a, _) = forward(&spec, &params, &batch).unwrap();
    let (b, _) = forward(&spec, &params, &batch).unwrap();
    assert_eq!(a.data(), b.data());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_rows_sum_to_one(logits in proptest::collection::vec(-1e3f64..1e3, 12)) {
        let p = softmax_rows(&Tensor::from_rows(3, 4, logits).unwrap());
        for row in p.data().chunks(4) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }

    #[test]
    fn shapes_do_not_depend_on_assignment(codes in proptest::collection::vec(0usize..7, 8 + 16 + 64)) {
        let topo = Topology::mnist_default();
        let kinds = ActivationKind::ALL;
        let base = topo.uniform(ActivationKind::Rel, ActivationKind::Rel, 0).unwrap();
        let al = vec![
            ActivationMap::new(codes[..8].iter().map(|&c| kinds[c]).collect()).unwrap(),
            ActivationMap::new(codes[8..24].iter().map(|&c| kinds[c]).collect()).unwrap(),
        ];
        let fc = vec![ActivationMap::new(codes[24..].iter().map(|&c| kinds[c]).collect()).unwrap()];
        let other = base.with_maps(&al, &fc).unwrap();
        prop_assert_eq!(
            shape_infer(base.input_shape(), base.layers()).unwrap(),
            shape_infer(other.input_shape(), other.layers()).unwrap()
        );
    }

    #[test]
    fn spec_text_round_trips(codes in proptest::collection::vec(0usize..7, 6 + 5)) {
        let kinds = ActivationKind::ALL;
        let spec = Topology {
            input: [1, 8, 8],
            blocks: vec![mcnn::model_space::ConvBlockSpec { channels: 6, kernel: 3, stride: 1, padding: 1, pool: Some(2) }],
            fc_hidden: vec![5],
            classes: 3,
        }
        .instantiate(
            vec![ActivationMap::new(codes[..6].iter().map(|&c| kinds[c]).collect()).unwrap()],
            vec![ActivationMap::new(codes[6..].iter().map(|&c| kinds[c]).collect()).unwrap()],
            0,
        )
        .unwrap();
        let parsed: NetworkSpec = spec.to_string().parse().unwrap();
        prop_assert_eq!(parsed.to_string(), spec.to_string());
        prop_assert_eq!(parsed.layers(), spec.layers());
    }
}

//! Independent oracles shared by the integration tests and the acceptance run.
//! Everything here is written with plain loops and does not call the code it checks,
//! except to obtain the analytic gradients being compared.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mcnn::activations::{apply_map_backward, apply_map_forward, ActivationKind, ActivationMap, Granularity};
use mcnn::network::{loss_and_backward, LayerSpec, NetworkParams, NetworkSpec};
use mcnn::tensor::{
    affine_backward, affine_forward, conv2d_backward, conv2d_forward, maxpool_backward, maxpool_forward,
};
use mcnn::tensor::{FilterBank, Matrix, Tensor};

pub const STEP: f64 = 1e-5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

pub fn max_rel(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_err(a, n))
        .fold(0.0, f64::max)
}

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn numeric_grad(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + STEP;
            let up = f(&probe);
            probe[i] = orig - STEP;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * STEP)
        })
        .collect()
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: [usize; 4]) -> Tensor {
    Tensor::new(shape, uniform_vec(rng, shape.iter().product(), -1.0, 1.0)).unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Direct convolution: for every output element, sum over input channels and
/// the kernel window of the zero-padded input, then add the bias.
pub fn conv_oracle(input: &Tensor, weights: &Tensor, bias: &[f64], stride: usize, padding: usize) -> Tensor {
    let [n, c, h, w] = input.shape();
    let [f, _, k, _] = weights.shape();
    let oh = (h + 2 * padding - k) / stride + 1;
    let ow = (w + 2 * padding - k) / stride + 1;
    let at = |b: usize, ch: usize, y: isize, x: isize| -> f64 {
        if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
            0.0
        } else {
            input.get(b, ch, y as usize, x as usize)
        }
    };
    let mut out = Tensor::zeros([n, f, oh, ow]);
    for b in 0..n {
        for (m, &bm) in bias.iter().enumerate().take(f) {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bm;
                    for ch in 0..c {
                        for i in 0..k {
                            for j in 0..k {
                                let y = (oy * stride + i) as isize - padding as isize;
                                let x = (ox * stride + j) as isize - padding as isize;
                                acc += weights.get(m, ch, i, j) * at(b, ch, y, x);
                            }
                        }
                    }
                    let o = out.offset(b, m, oy, ox);
                    out.data_mut()[o] = acc;
                }
            }
        }
    }
    out
}

/// `(accuracy, macro F1)` counted straight from the label pairs.
pub fn metrics_oracle(truth: &[usize], predicted: &[usize], classes: usize) -> (f64, f64) {
    let n = truth.len();
    let correct = truth.iter().zip(predicted).filter(|(t, p)| t == p).count();
    let accuracy = if n == 0 { 0.0 } else { correct as f64 / n as f64 };
    let mut f1_sum = 0.0;
    for c in 0..classes {
        let mut tp = 0u64;
        let mut fp = 0u64;
        let mut fn_ = 0u64;
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t == c, p == c) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                _ => {}
            }
        }
        let precision = if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        if precision + recall > 0.0 {
            f1_sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    (accuracy, if classes == 0 { 0.0 } else { f1_sum / classes as f64 })
}

/// Convolution parameters and input gradients against differences of `sum(g * conv(x))`.
pub fn conv_op_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (c, f, k) = (r.gen_range(1..=3), r.gen_range(1..=3), r.gen_range(1..=3));
    let stride = r.gen_range(1..=2);
    let padding = r.gen_range(0..=1);
    // smallest size >= 4 that tiles exactly
    let size = (4..).find(|s| (s + 2 * padding - k) % stride == 0).unwrap();
    let x = random_tensor(&mut r, [2, c, size, size]);
    let w = random_tensor(&mut r, [f, c, k, k]);
    let b = uniform_vec(&mut r, f, -0.5, 0.5);
    let bank = FilterBank::new(w.clone(), b.clone()).unwrap();
    let out = conv2d_forward(&x, &bank, stride, padding).unwrap();
    let g = random_tensor(&mut r, out.shape());
    let grads = conv2d_backward(&x, &bank, &g, stride, padding).unwrap();

    let objective = |xd: &[f64], wd: &[f64], bd: &[f64]| {
        let xt = Tensor::new(x.shape(), xd.to_vec()).unwrap();
        let bank = FilterBank::new(Tensor::new(w.shape(), wd.to_vec()).unwrap(), bd.to_vec()).unwrap();
        dot(conv2d_forward(&xt, &bank, stride, padding).unwrap().data(), g.data())
    };
    let nx = numeric_grad(x.data(), |p| objective(p, w.data(), &b));
    let nw = numeric_grad(w.data(), |p| objective(x.data(), p, &b));
    let nb = numeric_grad(&b, |p| objective(x.data(), w.data(), p));
    max_rel(grads.input.data(), &nx)
        .max(max_rel(grads.params.weights().data(), &nw))
        .max(max_rel(grads.params.biases(), &nb))
}

/// Max pooling on inputs whose entries are at least 1e-2 apart, so no window
/// has a tie and a step of 1e-5 never moves the argmax.
pub fn pool_op_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let c = r.gen_range(1..=3);
    let window = r.gen_range(1..=3);
    let side = window * r.gen_range(1..=3);
    let len = 2 * c * side * side;
    let mut values: Vec<f64> = (0..len).map(|i| i as f64 * 0.01).collect();
    values.shuffle(&mut r);
    let x = Tensor::new([2, c, side, side], values).unwrap();
    let (out, idx) = maxpool_forward(&x, window, window).unwrap();
    let g = random_tensor(&mut r, out.shape());
    let analytic = maxpool_backward(&idx, &g).unwrap();
    let numeric = numeric_grad(x.data(), |p| {
        let xt = Tensor::new(x.shape(), p.to_vec()).unwrap();
        dot(maxpool_forward(&xt, window, window).unwrap().0.data(), g.data())
    });
    max_rel(analytic.data(), &numeric)
}

pub fn affine_op_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (n, fin, fout) = (r.gen_range(1..=4), r.gen_range(1..=5), r.gen_range(1..=5));
    let x = Tensor::from_rows(n, fin, uniform_vec(&mut r, n * fin, -1.0, 1.0)).unwrap();
    let w = Matrix::new(fin, fout, uniform_vec(&mut r, fin * fout, -1.0, 1.0)).unwrap();
    let b = uniform_vec(&mut r, fout, -1.0, 1.0);
    let g = Tensor::from_rows(n, fout, uniform_vec(&mut r, n * fout, -1.0, 1.0)).unwrap();
    let grads = affine_backward(&x, &w, &g).unwrap();
    let objective = |xd: &[f64], wd: &[f64], bd: &[f64]| {
        let xt = Tensor::from_rows(n, fin, xd.to_vec()).unwrap();
        let wm = Matrix::new(fin, fout, wd.to_vec()).unwrap();
        dot(affine_forward(&xt, &wm, bd).unwrap().data(), g.data())
    };
    let nx = numeric_grad(x.data(), |p| objective(p, w.data(), &b));
    let nw = numeric_grad(w.data(), |p| objective(x.data(), p, &b));
    let nb = numeric_grad(&b, |p| objective(x.data(), w.data(), p));
    max_rel(grads.input.data(), &nx)
        .max(max_rel(grads.params.weights.data(), &nw))
        .max(max_rel(&grads.params.bias, &nb))
}

/// One activation kind on every channel; inputs stay at least 0.05 away
/// from 0, where REL and ELU with alpha != 1 have a kink.
pub fn activation_op_error(kind: ActivationKind, seed: u64) -> f64 {
    let mut r = rng(seed);
    let shape = [2, 3, 2, 2];
    let data: Vec<f64> = (0..24)
        .map(|_| {
            let mag = r.gen_range(0.05..3.0);
            if r.gen_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect();
    let x = Tensor::new(shape, data).unwrap();
    let map = ActivationMap::uniform(kind, 3).unwrap();
    let g = random_tensor(&mut r, shape);
    let analytic = apply_map_backward(&x, &map, &g, Granularity::PerChannel).unwrap();
    let numeric = numeric_grad(x.data(), |p| {
        let xt = Tensor::new(shape, p.to_vec()).unwrap();
        dot(
            apply_map_forward(&xt, &map, Granularity::PerChannel).unwrap().data(),
            g.data(),
        )
    });
    max_rel(analytic.data(), &numeric)
}

/// Differences of the network loss over every parameter buffer.
pub fn network_param_error(spec: &NetworkSpec, params: &NetworkParams, batch: &Tensor, labels: &[usize]) -> f64 {
    let (_, grads) = loss_and_backward(spec, params, batch, labels).unwrap();
    let analytic = grads.to_flat();
    let flat = params.to_flat();
    let numeric = numeric_grad(&flat, |p| {
        let mut probe = params.clone();
        let mut at = 0;
        for s in probe.slices_mut() {
            let len = s.len();
            s.copy_from_slice(&p[at..at + len]);
            at += len;
        }
        loss_and_backward(spec, &probe, batch, labels).unwrap().0
    });
    max_rel(&analytic, &numeric)
}

/// Softmax with cross-entropy on its own: flat input straight into the output layer.
pub fn softmax_ce_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (features, classes, n) = (r.gen_range(2..=5), r.gen_range(2..=5), r.gen_range(1..=4));
    let spec = NetworkSpec::new(
        [features, 1, 1],
        vec![LayerSpec::Flatten, LayerSpec::SoftmaxHead { classes }],
        seed,
    )
    .unwrap();
    let mut params = mcnn::network::init_params(&spec, seed);
    for s in params.slices_mut() {
        for v in s.iter_mut() {
            *v = r.gen_range(-1.0..1.0);
        }
    }
    let batch = random_tensor(&mut r, [n, features, 1, 1]);
    let labels: Vec<usize> = (0..n).map(|_| r.gen_range(0..classes)).collect();
    network_param_error(&spec, &params, &batch, &labels)
}

/// Small labeled set with the given per-sample labels and 1x1 images.
pub fn label_only_dataset(labels: Vec<usize>, classes: usize) -> mcnn::data::LabeledDataset {
    let n = labels.len();
    mcnn::data::LabeledDataset::new(Tensor::zeros([n, 1, 1, 1]), labels, classes).unwrap()
}

/// Every fold partition property plus the per-class balance bound.
pub fn check_fold_plan(plan: &mcnn::data::FoldPlan, labels: &[usize], classes: usize) -> Result<(), String> {
    let mut seen = vec![0usize; labels.len()];
    for f in &plan.folds {
        for &i in f {
            *seen.get_mut(i).ok_or(format!("index {i} out of range"))? += 1;
        }
    }
    if seen.iter().any(|&s| s != 1) {
        return Err("folds do not partition the indices".into());
    }
    for c in 0..classes {
        let counts: Vec<usize> = plan
            .folds
            .iter()
            .map(|f| f.iter().filter(|&&i| labels[i] == c).count())
            .collect();
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        if hi - lo > 1 {
            return Err(format!("class {c} fold counts {counts:?}"));
        }
    }
    Ok(())
}

/// Every digit vector of `units` positions over `base` symbols, in odometer order.
fn for_each_digits(base: usize, units: usize, mut f: impl FnMut(&[usize])) {
    let mut cur = vec![0; units];
    loop {
        f(&cur);
        let mut pos = units;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            cur[pos] += 1;
            if cur[pos] < base {
                break;
            }
            cur[pos] = 0;
        }
    }
}

fn counting_topology(m: usize, n: Option<usize>) -> mcnn::model_space::Topology {
    mcnn::model_space::Topology {
        input: [1, 1, 1],
        blocks: vec![mcnn::model_space::ConvBlockSpec {
            channels: m,
            kernel: 1,
            stride: 1,
            padding: 0,
            pool: None,
        }],
        fc_hidden: n.into_iter().collect(),
        classes: 2,
    }
}

fn map_of(digits: &[usize]) -> ActivationMap {
    ActivationMap::new(digits.iter().map(|&d| ActivationKind::ALL[d]).collect()).unwrap()
}

/// Builds every assignment of `j` functions over `m` conv channels and `k`
/// functions over `n` FC neurons (or no FC layer) and tallies `classify_family`.
pub fn brute_family_counts(
    j: usize,
    m: usize,
    fc: Option<(usize, usize)>,
) -> std::collections::HashMap<mcnn::network::Family, u64> {
    let topo = counting_topology(m, fc.map(|(_, n)| n));
    let mut tally = std::collections::HashMap::new();
    for_each_digits(j, m, |al| {
        let al_map = map_of(al);
        match fc {
            None => {
                let spec = topo.instantiate(vec![al_map.clone()], vec![], 0).unwrap();
                *tally.entry(mcnn::network::classify_family(&spec)).or_insert(0) += 1;
            }
            Some((k, n)) => for_each_digits(k, n, |f| {
                let spec = topo.instantiate(vec![al_map.clone()], vec![map_of(f)], 0).unwrap();
                *tally.entry(mcnn::network::classify_family(&spec)).or_insert(0) += 1;
            }),
        }
    });
    tally
}

/// `(j, m)` pairs with `j^m <= limit`; `m` is capped at `cap` when `j = 1`.
pub fn pool_unit_pairs(limit: u64, cap: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for j in 1..=ActivationKind::ALL.len() as u32 {
        let mut m = 1;
        while (j as u64).pow(m) <= limit && m <= if j == 1 { cap } else { u32::MAX } {
            out.push((j, m));
            m += 1;
        }
    }
    out
}

/// Checks the closed-form family sizes against brute force for every
/// `(j, k, m, n)` with `j^m k^n <= limit` and every `(j, m)` with `j^m <= limit`.
/// Returns the number of tuples checked.
pub fn check_counting(limit: u64, cap: u32) -> Result<usize, String> {
    use mcnn::network::Family;
    use num_traits::ToPrimitive;
    let pairs = pool_unit_pairs(limit, cap);
    let mut checked = 0;
    for &(j, m) in &pairs {
        for &(k, n) in &pairs {
            let total = (j as u64).pow(m) * (k as u64).pow(n);
            if total > limit {
                continue;
            }
            let counts = mcnn::model_space::count_families(j, k, m, n).map_err(|e| e.to_string())?;
            let tally = brute_family_counts(j as usize, m as usize, Some((k as usize, n as usize)));
            let mut sum = 0;
            for fam in [Family::ScnnSs, Family::McnnSm, Family::McnnMs, Family::McnnMm] {
                let formula = counts.get(fam).to_u64().unwrap();
                let brute = tally.get(&fam).copied().unwrap_or(0);
                if formula != brute {
                    return Err(format!(
                        "(j,k,m,n)=({j},{k},{m},{n}) {fam}: formula {formula}, brute force {brute}"
                    ));
                }
                sum += formula;
            }
            if sum != total || tally.len() > 4 {
                return Err(format!(
                    "(j,k,m,n)=({j},{k},{m},{n}): counts sum to {sum}, expected {total}"
                ));
            }
            checked += 1;
        }
    }
    for &(j, m) in &pairs {
        let (single, multi) = mcnn::model_space::single_pool_counts(j, m);
        let tally = brute_family_counts(j as usize, m as usize, None);
        let got = (
            tally.get(&Family::ScnnS).copied().unwrap_or(0),
            tally.get(&Family::McnnM).copied().unwrap_or(0),
        );
        let counts = mcnn::model_space::count_families(j, 1, m, 1).map_err(|e| e.to_string())?;
        let want = (single.to_u64().unwrap(), multi.to_u64().unwrap());
        let table = (counts.scnn_s.to_u64().unwrap(), counts.mcnn_m.to_u64().unwrap());
        if got != want || table != want || got.0 + got.1 != (j as u64).pow(m) {
            return Err(format!(
                "(j,m)=({j},{m}): brute force {got:?}, formulas {want:?} / {table:?}"
            ));
        }
        checked += 1;
    }
    Ok(checked)
}

/// Pearson chi-square statistic of observed counts against a uniform law.
pub fn chi_square_uniform(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
}

/// Upper 1% critical values of chi-square for 1..=11 degrees of freedom.
pub const CHI2_CRIT_01: [f64; 11] = [
    6.635, 9.210, 11.345, 13.277, 15.086, 16.812, 18.475, 20.090, 21.666, 23.209, 24.725,
];

/// Random single-channel dataset whose pixels are exact multiples of 1/255
/// and whose largest label is `classes - 1`.
pub fn random_idx_dataset(r: &mut ChaCha8Rng) -> mcnn::data::LabeledDataset {
    let (n, h, w, classes) = (
        r.gen_range(1..=12),
        r.gen_range(1..=6),
        r.gen_range(1..=6),
        r.gen_range(1..=10),
    );
    let pixels: Vec<f64> = (0..n * h * w)
        .map(|_| f64::from(r.gen_range(0u8..=255)) / 255.0)
        .collect();
    let mut labels: Vec<usize> = (0..n).map(|_| r.gen_range(0..classes)).collect();
    labels[r.gen_range(0..n)] = classes - 1;
    mcnn::data::LabeledDataset::new(Tensor::new([n, 1, h, w], pixels).unwrap(), labels, classes).unwrap()
}

/// Writes and reloads `fixtures` random datasets (alternating plain and gzip
/// files), then feeds the loader a bad magic, a count mismatch, and a
/// truncated file. Returns a description of the first failure.
pub fn idx_suite(seed: u64, fixtures: usize, dir: &std::path::Path) -> Result<(), String> {
    use mcnn::data::{decode_idx, encode_idx, load_idx, write_idx};
    use mcnn::error::Error;
    let mut r = rng(seed);
    for i in 0..fixtures {
        let ds = random_idx_dataset(&mut r);
        let ext = if i % 2 == 0 { "" } else { ".gz" };
        let (ip, lp) = (dir.join(format!("img{i}{ext}")), dir.join(format!("lbl{i}{ext}")));
        write_idx(&ds, &ip, &lp).map_err(|e| e.to_string())?;
        let back = load_idx(&ip, &lp).map_err(|e| e.to_string())?;
        if back.images() != ds.images() || back.labels() != ds.labels() || back.classes() != ds.classes() {
            return Err(format!("fixture {i} did not round-trip"));
        }
    }

    let ds = random_idx_dataset(&mut r);
    let (images, labels) = encode_idx(&ds).map_err(|e| e.to_string())?;
    let mut bad_magic = images.clone();
    bad_magic[3] = 0x01;
    let mut short_labels = labels.clone();
    short_labels.pop();
    let n = u32::from_be_bytes([labels[4], labels[5], labels[6], labels[7]]);
    let mut extra_labels = labels[..4].to_vec();
    extra_labels.extend_from_slice(&(n + 1).to_be_bytes());
    extra_labels.extend_from_slice(&labels[8..]);
    extra_labels.push(0);
    let truncated = &images[..images.len() - 1];

    match decode_idx(&bad_magic, &labels) {
        Err(Error::Format(m)) if m.contains("magic") => {}
        other => return Err(format!("bad magic gave {other:?}")),
    }
    match decode_idx(&images, &extra_labels) {
        Err(Error::Data(_)) => {}
        other => return Err(format!("count mismatch gave {other:?}")),
    }
    for (what, img, lbl) in [
        ("images", truncated, &labels[..]),
        ("labels", &images[..], &short_labels[..]),
    ] {
        match decode_idx(img, lbl) {
            Err(Error::Format(_)) => {}
            other => return Err(format!("truncated {what} gave {other:?}")),
        }
    }
    Ok(())
}

/// Random labels over `classes` with every class present at least `k` times.
pub fn random_labels(r: &mut ChaCha8Rng, classes: usize, k: usize, extra: usize) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..classes).flat_map(|c| std::iter::repeat_n(c, k)).collect();
    labels.extend((0..extra).map(|_| r.gen_range(0..classes)));
    labels.shuffle(r);
    labels
}

/// A quick synthetic MM experiment: 3 candidates plus 3 baselines, 2 folds.
pub fn small_experiment_toml(seed: u64) -> String {
    format!(
        r#"seed = {seed}
family = "MM"
candidates = 3
baselines = true
folds = 2

[data]
source = "synthetic"
classes = 3
per_class = 12
height = 8
width = 8

[topology]
blocks = [{{ channels = 3, kernel = 3, padding = 1, pool = 2 }}]
fc_hidden = [4]

[pools]
al = ["REL", "SIG", "TAN"]
fc = ["REL", "SIG", "TAN"]

[train]
epochs = 2
batch_size = 8
learning_rate = 0.1
"#
    )
}

/// One parsed result row.
#[derive(Debug)]
pub struct CsvRow {
    pub rank: usize,
    pub family: String,
    pub spec: String,
    pub test_acc: Option<f64>,
}

/// Checks the header, the row count, rank order, and that each row's family
/// label agrees with the classification of its spec string.
pub fn validate_csv(text: &str, rows: usize) -> Result<Vec<CsvRow>, String> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(String::from)
        .collect();
    if header != mcnn::cli::CSV_HEADER {
        return Err(format!("unexpected header {header:?}"));
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let spec: NetworkSpec = rec[2].parse().map_err(|e: mcnn::error::Error| e.to_string())?;
        let family = mcnn::network::classify_family(&spec);
        if family.label() != &rec[1] {
            return Err(format!(
                "row {} says {} but its spec is {}",
                &rec[0],
                &rec[1],
                family.label()
            ));
        }
        out.push(CsvRow {
            rank: rec[0].parse().map_err(|_| format!("bad rank `{}`", &rec[0]))?,
            family: rec[1].to_string(),
            spec: rec[2].to_string(),
            test_acc: if rec[4].is_empty() {
                None
            } else {
                Some(rec[4].parse().map_err(|_| "bad accuracy")?)
            },
        });
    }
    if out.len() != rows {
        return Err(format!("{} rows, expected {rows}", out.len()));
    }
    for (i, w) in out.windows(2).enumerate() {
        let ok = match (w[0].test_acc, w[1].test_acc) {
            (Some(a), Some(b)) => a >= b,
            (Some(_), None) | (None, None) => true,
            (None, Some(_)) => false,
        };
        if !ok || w[0].rank != i + 1 || w[1].rank != i + 2 {
            return Err(format!("rows {} and {} are out of order", i + 1, i + 2));
        }
    }
    Ok(out)
}

/// Runs the `mcnn` binary and returns `(exit code, stdout, stderr)`.
pub fn run_bin(args: &[&std::ffi::OsStr]) -> (i32, String, String) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_mcnn"))
        .args(args)
        .env_remove("MCNN_WORKERS")
        .output()
        .expect("mcnn binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// Evenly spaced values in [-1, 1], shuffled, so pooling windows never hold
/// two entries closer than the finite-difference step.
pub fn spread_tensor(r: &mut ChaCha8Rng, shape: [usize; 4]) -> Tensor {
    let n: usize = shape.iter().product();
    let mut values: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / n.max(2) as f64).collect();
    values.shuffle(r);
    Tensor::new(shape, values).unwrap()
}

/// Inception block parameter and input gradients against differences of
/// `sum(g * block(x))` with random `g`, at small random biases.
pub fn block_error(block: &mcnn::inception::InceptionBlock, seed: u64) -> f64 {
    use mcnn::inception::{block_backward, block_forward, init_block_params, BlockParams};
    let mut r = rng(seed);
    let mut params = init_block_params(block, seed);
    for bank in params.paths.iter_mut().flatten().flatten() {
        bank.biases_mut().iter_mut().for_each(|b| *b = r.gen_range(-0.2..0.2));
    }
    let x = spread_tensor(&mut r, [1, block.in_channels(), 6, 6]);
    let out = block_forward(block, &params, &x).unwrap();
    let g = random_tensor(&mut r, out.shape());
    let grads = block_backward(block, &params, &x, &g).unwrap();

    let flat: Vec<f64> = params.slices().concat();
    let with_flat = |p: &[f64]| -> BlockParams {
        let mut probe = params.clone();
        let mut at = 0;
        for s in probe.slices_mut() {
            let len = s.len();
            s.copy_from_slice(&p[at..at + len]);
            at += len;
        }
        probe
    };
    let np = numeric_grad(&flat, |p| {
        dot(block_forward(block, &with_flat(p), &x).unwrap().data(), g.data())
    });
    let nx = numeric_grad(x.data(), |p| {
        let xt = Tensor::new(x.shape(), p.to_vec()).unwrap();
        dot(block_forward(block, &params, &xt).unwrap().data(), g.data())
    });
    max_rel(&grads.params.slices().concat(), &np).max(max_rel(grads.input.data(), &nx))
}

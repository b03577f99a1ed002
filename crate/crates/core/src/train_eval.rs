//! Mini-batch SGD, multi-class metrics, cross-validation, and ranking.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{FoldPlan, LabeledDataset};
use crate::error::{Error, Result};
use crate::network::{init_params, loss_and_backward, predict, Family, NetworkParams, NetworkSpec};

#[derive(Clone, Debug, PartialEq, serde::Deserialize, serde::Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 3,
            batch_size: 32,
            learning_rate: 0.05,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config_field("epochs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config_field("batch_size", "must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::config_field(
                "learning_rate",
                format!("must be a non-negative number, got {}", self.learning_rate),
            ));
        }
        Ok(())
    }
}

/// Parameters after training plus the mean loss of every epoch.
#[derive(Clone, Debug)]
pub struct TrainRun {
    pub params: NetworkParams,
    pub epoch_losses: Vec<f64>,
}

/// Initializes from `config.seed` and trains.
pub fn train(spec: &NetworkSpec, data: &LabeledDataset, config: &TrainConfig) -> Result<NetworkParams> {
    Ok(train_from(spec, init_params(spec, config.seed), data, config)?.params)
}

/// Plain SGD from the given parameters: `w <- w - lr * grad` per mini-batch.
/// Batch order is reshuffled every epoch from a stream seeded by `config.seed`.
pub fn train_from(
    spec: &NetworkSpec,
    mut params: NetworkParams,
    data: &LabeledDataset,
    config: &TrainConfig,
) -> Result<TrainRun> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let x = data.images().select(idx);
            let y: Vec<usize> = idx.iter().map(|&i| data.labels()[i]).collect();
            let (loss, grads) = loss_and_backward(spec, &params, &x, &y)?;
            if !loss.is_finite() || !grads.all_finite() {
                return Err(Error::Divergence {
                    fold: None,
                    epoch,
                    batch,
                    loss,
                });
            }
            params.axpy(-config.learning_rate, &grads)?;
            if !params.all_finite() {
                return Err(Error::Divergence {
                    fold: None,
                    epoch,
                    batch,
                    loss: f64::NAN,
                });
            }
            total += loss * idx.len() as f64;
        }
        epoch_losses.push(total / data.len() as f64);
    }
    Ok(TrainRun { params, epoch_losses })
}

/// Mean cross-entropy over a dataset.
pub fn dataset_loss(spec: &NetworkSpec, params: &NetworkParams, data: &LabeledDataset) -> Result<f64> {
    let mut total = 0.0;
    let all: Vec<usize> = (0..data.len()).collect();
    for idx in all.chunks(EVAL_BATCH) {
        let x = data.images().select(idx);
        let y: Vec<usize> = idx.iter().map(|&i| data.labels()[i]).collect();
        total += loss_and_backward(spec, params, &x, &y)?.0 * idx.len() as f64;
    }
    Ok(total / data.len().max(1) as f64)
}

const EVAL_BATCH: usize = 256;

/// Counts indexed `[true][predicted]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_predictions(truth: &[usize], predicted: &[usize], classes: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::dim("confusion matrix", truth.len(), predicted.len()));
        }
        let mut m = Self::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= classes || p >= classes {
                return Err(Error::Data(format!("class index outside {classes} classes")));
            }
            m.counts[t * classes + p] += 1;
        }
        Ok(m)
    }

    /// Rows are true classes.
    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let classes = rows.len();
        if rows.iter().any(|r| r.len() != classes) {
            return Err(Error::InvalidArgument("confusion matrix must be square".into()));
        }
        Ok(ConfusionMatrix {
            classes,
            counts: rows.concat(),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|c| self.get(c, c)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::dim("confusion matrix add", self.classes, other.classes));
        }
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.trace() as f64 / t as f64,
        }
    }

    /// F1 of one class; 0 when precision and recall are both 0 or undefined.
    pub fn f1(&self, class: usize) -> f64 {
        let tp = self.get(class, class) as f64;
        let predicted: u64 = (0..self.classes).map(|t| self.get(t, class)).sum();
        let actual: u64 = (0..self.classes).map(|p| self.get(class, p)).sum();
        let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let recall = if actual == 0 { 0.0 } else { tp / actual as f64 };
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    }

    /// Unweighted mean of per-class F1.
    pub fn macro_f1(&self) -> f64 {
        if self.classes == 0 {
            return 0.0;
        }
        (0..self.classes).map(|c| self.f1(c)).sum::<f64>() / self.classes as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
}

impl Metrics {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        Metrics {
            accuracy: confusion.accuracy(),
            macro_f1: confusion.macro_f1(),
            confusion,
        }
    }
}

/// Argmax predictions (ties to the lowest class) tallied against the labels.
pub fn evaluate(spec: &NetworkSpec, params: &NetworkParams, data: &LabeledDataset) -> Result<Metrics> {
    let classes = spec.classes();
    let mut predicted = Vec::with_capacity(data.len());
    let all: Vec<usize> = (0..data.len()).collect();
    for idx in all.chunks(EVAL_BATCH) {
        predicted.extend(predict(spec, params, &data.images().select(idx))?);
    }
    Ok(Metrics::from_confusion(ConfusionMatrix::from_predictions(
        data.labels(),
        &predicted,
        classes,
    )?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldReport {
    pub seed: u64,
    pub train: Metrics,
    pub test: Metrics,
}

/// Mean metrics over folds. `confusion` pools the test predictions of every fold.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub train_f1: f64,
    pub test_f1: f64,
    pub confusion: ConfusionMatrix,
    pub folds: Vec<FoldReport>,
    /// Set when a single fold was used, so train and test data coincide.
    pub degenerate: bool,
}

impl EvalReport {
    pub fn from_folds(folds: Vec<FoldReport>) -> Result<Self> {
        let first = folds
            .first()
            .ok_or_else(|| Error::InvalidArgument("report needs at least one fold".into()))?;
        let mut confusion = ConfusionMatrix::new(first.test.confusion.classes());
        for f in &folds {
            confusion.add(&f.test.confusion)?;
        }
        let n = folds.len() as f64;
        let mean = |get: fn(&FoldReport) -> f64| folds.iter().map(get).sum::<f64>() / n;
        Ok(EvalReport {
            train_accuracy: mean(|f| f.train.accuracy),
            test_accuracy: mean(|f| f.test.accuracy),
            train_f1: mean(|f| f.train.macro_f1),
            test_f1: mean(|f| f.test.macro_f1),
            confusion,
            degenerate: folds.len() == 1,
            folds,
        })
    }
}

/// Trains a fresh network per fold (seed `config.seed + fold`) and evaluates it
/// on the held-out fold and on its own training portion.
pub fn cross_validate(
    spec: &NetworkSpec,
    data: &LabeledDataset,
    plan: &FoldPlan,
    config: &TrainConfig,
) -> Result<EvalReport> {
    let covered: usize = plan.folds.iter().map(Vec::len).sum();
    if covered != data.len() || plan.folds.iter().flatten().any(|&i| i >= data.len()) {
        return Err(Error::Data(format!(
            "fold plan covers {covered} samples but the dataset has {}",
            data.len()
        )));
    }
    let mut folds = Vec::with_capacity(plan.k);
    for fold in 0..plan.k {
        let train_set = data.subset(&plan.train_indices(fold));
        let test_set = data.subset(plan.test_indices(fold));
        let cfg = TrainConfig {
            seed: config.seed.wrapping_add(fold as u64),
            ..config.clone()
        };
        let params = train(spec, &train_set, &cfg).map_err(|e| match e {
            Error::Divergence { epoch, batch, loss, .. } => Error::Divergence {
                fold: Some(fold),
                epoch,
                batch,
                loss,
            },
            other => other,
        })?;
        folds.push(FoldReport {
            seed: cfg.seed,
            train: evaluate(spec, &params, &train_set)?,
            test: evaluate(spec, &params, &test_set)?,
        });
    }
    EvalReport::from_folds(folds)
}

/// Trains on `train_set` and evaluates on both sets, reported as a single fold.
pub fn holdout_evaluate(
    spec: &NetworkSpec,
    train_set: &LabeledDataset,
    test_set: &LabeledDataset,
    config: &TrainConfig,
) -> Result<EvalReport> {
    let params = train(spec, train_set, config)?;
    let mut report = EvalReport::from_folds(vec![FoldReport {
        seed: config.seed,
        train: evaluate(spec, &params, train_set)?,
        test: evaluate(spec, &params, test_set)?,
    }])?;
    report.degenerate = false;
    Ok(report)
}

/// One evaluated candidate; `report` is `None` when training diverged.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub spec: NetworkSpec,
    pub seed: u64,
    pub report: Option<EvalReport>,
}

#[derive(Clone, Debug)]
pub struct RankedRow {
    pub rank: usize,
    pub family: Family,
    pub is_mcnn: bool,
    pub descriptor: String,
    pub spec_text: String,
    pub seed: u64,
    pub report: Option<EvalReport>,
}

#[derive(Clone, Debug)]
pub struct RankedTable {
    pub rows: Vec<RankedRow>,
}

fn row_order(a: &RankedRow, b: &RankedRow) -> Ordering {
    match (&a.report, &b.report) {
        (Some(x), Some(y)) => y.test_accuracy.total_cmp(&x.test_accuracy),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
    .then_with(|| a.descriptor.cmp(&b.descriptor))
    .then_with(|| a.spec_text.cmp(&b.spec_text))
    .then_with(|| a.seed.cmp(&b.seed))
}

/// Sorts by descending mean test accuracy, then descriptor, then spec text.
/// Diverged candidates go last.
pub fn rank_candidates(candidates: Vec<Candidate>) -> RankedTable {
    let mut rows: Vec<RankedRow> = candidates
        .into_iter()
        .map(|c| {
            let family = c.spec.family();
            RankedRow {
                rank: 0,
                family,
                is_mcnn: family.is_mcnn(),
                descriptor: c.spec.descriptor(),
                spec_text: c.spec.to_string(),
                seed: c.seed,
                report: c.report,
            }
        })
        .collect();
    rows.sort_by(row_order);
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    RankedTable { rows }
}

impl RankedTable {
    pub fn is_sorted(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| row_order(&w[0], &w[1]) != Ordering::Greater)
    }
}

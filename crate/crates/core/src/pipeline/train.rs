use serde::{Deserialize, Serialize};

use super::model::{decode_predictions, forward_pass, total_loss, Batch, LossBreakdown, ModelBundle};
use super::RunConfig;
use crate::metrics::{task_metrics, MetricSet, MetricSettings};
use crate::modality::{Label, Task};
use crate::numkit::{AdamState, SeededRng};
use crate::synthdata::{DatasetSpec, Sample};
use crate::{Error, Result};

/// Random stream used for shuffling and loss sampling during training.
const TRAIN_STREAM: u64 = 2;
/// Random stream used for parameter initialization.
const INIT_STREAM: u64 = 1;

/// Fresh bundle for `cfg` and `spec`, seeded from `cfg.seed`.
pub fn init_bundle(spec: &DatasetSpec, cfg: &RunConfig) -> Result<ModelBundle> {
    use super::model::BundleDims;
    use crate::modality::Modality;
    cfg.validate()?;
    let dims = BundleDims::new(cfg.d, Modality::ALL.map(|m| spec.modality_dim(m)), spec.task, spec.classes());
    ModelBundle::init(dims, &mut SeededRng::with_stream(cfg.seed, INIT_STREAM))
}

pub fn metric_settings(spec: &DatasetSpec, cfg: &RunConfig) -> MetricSettings {
    MetricSettings {
        task: spec.task,
        acc_bins: cfg.acc_bins,
        label_range: spec.label_range,
        classes: spec.classes(),
    }
}

/// Train/validation/test samples.
#[derive(Debug, Clone, Copy)]
pub struct Splits<'a> {
    pub train: &'a [Sample],
    pub val: &'a [Sample],
    pub test: &'a [Sample],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Batch-averaged unweighted loss terms.
    pub losses: LossBreakdown,
    pub val: MetricSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (best validation score).
    pub best_epoch: Option<usize>,
    pub test: Option<MetricSet>,
}

/// Predictions and metrics of a bundle on one split.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub metrics: MetricSet,
    pub predictions: Vec<Label>,
}

/// Scores a bundle on `samples` without touching its parameters.
pub fn evaluate(bundle: &ModelBundle, samples: &[Sample], cfg: &RunConfig, settings: &MetricSettings) -> Result<Evaluation> {
    let batch = Batch::from_samples(samples)?;
    let (pred, _) = forward_pass(bundle, &batch, cfg)?;
    let predictions = decode_predictions(&pred, bundle.dims.task);
    let metrics = task_metrics(&predictions, &batch.labels, settings)?;
    Ok(Evaluation { metrics, predictions })
}

/// Higher is better.
fn selection_score(metrics: &MetricSet, task: Task) -> f64 {
    match task {
        Task::Classification => metrics.accuracy(),
        Task::Regression => -metrics.get("mae").unwrap_or(f64::INFINITY),
    }
}

/// Adam-trains every network of `bundle` on shuffled minibatches, validating
/// after each epoch and keeping the parameters of the best validation epoch.
pub fn train(bundle: &mut ModelBundle, splits: Splits<'_>, cfg: &RunConfig, settings: &MetricSettings) -> Result<TrainReport> {
    cfg.validate()?;
    let mut report = TrainReport {
        epochs: Vec::with_capacity(cfg.epochs),
        best_epoch: None,
        test: None,
    };
    if cfg.epochs == 0 {
        return Ok(report);
    }
    if splits.train.is_empty() || splits.val.is_empty() {
        return Err(Error::Empty("training and validation splits"));
    }

    let mut rng = SeededRng::with_stream(cfg.seed, TRAIN_STREAM);
    let mut optim: Vec<AdamState> = bundle.networks().iter().map(|(_, n)| AdamState::new(n, cfg.lr)).collect();
    let mut order: Vec<usize> = (0..splits.train.len()).collect();
    let mut best: Option<(f64, ModelBundle)> = None;

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut sums = LossBreakdown::default();
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch = Batch::from_samples(chunk.iter().map(|&i| &splits.train[i]))?;
            let (losses, grads) = total_loss(bundle, &batch, cfg, &mut rng)?;
            if !losses.total.is_finite() || !grads.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("training loss at epoch {epoch}, batch {b}"),
                });
            }
            for ((net, state), g) in bundle.networks_mut().into_iter().zip(&mut optim).zip(grads.all()) {
                state.step(net, g)?;
            }
            sums.total += losses.total;
            sums.main += losses.main;
            for s in 0..2 {
                sums.forward[s] += losses.forward[s];
                sums.backward[s] += losses.backward[s];
            }
            batches += 1;
        }
        let n = batches as f64;
        let losses = LossBreakdown {
            total: sums.total / n,
            main: sums.main / n,
            forward: sums.forward.map(|v| v / n),
            backward: sums.backward.map(|v| v / n),
        };
        let val = evaluate(bundle, splits.val, cfg, settings)?.metrics;
        let score = selection_score(&val, bundle.dims.task);
        // Ties go to the later epoch: accuracy saturates long before the flows converge.
        if best.as_ref().is_none_or(|(s, _)| score >= *s) {
            best = Some((score, bundle.clone()));
            report.best_epoch = Some(epoch);
        }
        report.epochs.push(EpochRecord { epoch, losses, val });
    }
    if let Some((_, kept)) = best {
        *bundle = kept;
    }
    if !splits.test.is_empty() {
        report.test = Some(evaluate(bundle, splits.test, cfg, settings)?.metrics);
    }
    Ok(report)
}

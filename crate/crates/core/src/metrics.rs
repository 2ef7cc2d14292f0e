//! Alignment, cycle-consistency and downstream task measures.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::modality::{Label, Task};
use crate::numkit::{euclidean, squared_distance, Matrix, Scalar};
use crate::{Error, Result};

/// Orders two point sets canonically so that symmetric statistics are
/// evaluated with the same summation order whichever way they are passed.
fn canonical_order<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Ordering {
    a.shape().cmp(&b.shape()).then_with(|| {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| x.partial_cmp(y).unwrap_or(Ordering::Equal))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

fn mean_pairwise<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> T {
    let mut total = T::zero();
    for x in a.iter_rows() {
        for y in b.iter_rows() {
            total += euclidean(x, y);
        }
    }
    total / T::from_usize(a.rows() * b.rows()).unwrap()
}

/// Energy distance `2·E‖a−b‖ − E‖a−a′‖ − E‖b−b′‖`, averaging over all
/// ordered pairs (including `a = a′`), so identical multisets give exactly 0.
pub fn energy_distance<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<T> {
    if a.rows() < 2 || b.rows() < 2 {
        return Err(Error::Empty("energy distance needs at least two points per set"));
    }
    if a.cols() != b.cols() {
        return Err(Error::shape("energy_distance", a.cols(), b.cols()));
    }
    let (a, b) = match canonical_order(a, b) {
        Ordering::Greater => (b, a),
        _ => (a, b),
    };
    let cross = mean_pairwise(a, b);
    let within_a = mean_pairwise(a, a);
    let within_b = mean_pairwise(b, b);
    let e = (cross + cross) - within_a - within_b;
    Ok(e.max(T::zero()))
}

/// Euclidean distance between the column means.
pub fn centroid_gap<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<T> {
    if a.rows() == 0 || b.rows() == 0 {
        return Err(Error::Empty("centroid gap of an empty set"));
    }
    if a.cols() != b.cols() {
        return Err(Error::shape("centroid_gap", a.cols(), b.cols()));
    }
    Ok(euclidean(&a.column_means(), &b.column_means()))
}

/// Mean over samples of `‖x − x_rec‖² / d`.
pub fn cycle_error<T: Scalar>(x_src: &Matrix<T>, x_rec: &Matrix<T>) -> Result<T> {
    x_src.check_same_shape(x_rec, "cycle_error")?;
    if x_src.rows() == 0 || x_src.cols() == 0 {
        return Err(Error::Empty("cycle error of an empty set"));
    }
    let total: T = x_src.iter_rows().zip(x_rec.iter_rows()).map(|(a, b)| squared_distance(a, b)).sum();
    Ok(total / T::from_usize(x_src.rows() * x_src.cols()).unwrap())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub energy_distance: f64,
    pub centroid_gap: f64,
    pub counts: [usize; 2],
}

pub fn gap_report<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<GapReport> {
    Ok(GapReport {
        energy_distance: energy_distance(a, b)?.to_f64_lossy(),
        centroid_gap: centroid_gap(a, b)?.to_f64_lossy(),
        counts: [a.rows(), b.rows()],
    })
}

/// Flat metric map plus flags for degenerate cases.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    #[serde(flatten)]
    pub values: BTreeMap<String, f64>,
    pub flags: Vec<String>,
}

impl MetricSet {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    /// Headline downstream accuracy in percent (`acc2`).
    pub fn accuracy(&self) -> f64 {
        self.get("acc2").unwrap_or(f64::NAN)
    }
}

/// How predictions are scored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSettings {
    pub task: Task,
    /// Number of equal-width label bins for the multi-class regression accuracy.
    pub acc_bins: usize,
    /// Fixed label interval that defines the bins and the binary threshold.
    pub label_range: [f64; 2],
    pub classes: usize,
}

/// Bin of `v` among `bins` equal-width bins on `[lo, hi]`; values outside the
/// range fall into the end bins.
pub fn bin_index(v: f64, range: [f64; 2], bins: usize) -> usize {
    let [lo, hi] = range;
    let width = (hi - lo) / bins as f64;
    let edge = |i: usize| lo + i as f64 * width;
    let mut idx = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
    // settle on the explicit edges so rounding in the division cannot disagree
    while idx > 0 && v < edge(idx) {
        idx -= 1;
    }
    while idx + 1 < bins && v >= edge(idx + 1) {
        idx += 1;
    }
    idx
}

fn pct(hits: usize, n: usize) -> f64 {
    100.0 * hits as f64 / n as f64
}

/// Support-weighted F1 over the classes present in `labels`, in percent.
pub fn weighted_f1(pred: &[usize], labels: &[usize]) -> f64 {
    let classes = labels.iter().chain(pred).copied().max().map_or(0, |m| m + 1);
    let mut tp = vec![0usize; classes];
    let mut pred_count = vec![0usize; classes];
    let mut support = vec![0usize; classes];
    for (&p, &y) in pred.iter().zip(labels) {
        pred_count[p] += 1;
        support[y] += 1;
        if p == y {
            tp[p] += 1;
        }
    }
    let mut total = 0.0;
    for c in 0..classes {
        if support[c] == 0 {
            continue;
        }
        let precision = if pred_count[c] == 0 {
            0.0
        } else {
            tp[c] as f64 / pred_count[c] as f64
        };
        let recall = tp[c] as f64 / support[c] as f64;
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        total += f1 * support[c] as f64;
    }
    100.0 * total / labels.len() as f64
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
    if x.is_empty() || constant(x) || constant(y) {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        None
    } else {
        Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
    }
}

/// Downstream metrics.
///
/// Regression: `acc{K}` (equal-width bins over the label range), `acc2`
/// (above/below the range midpoint), `f1` (weighted, on the binary split),
/// `mae`, `corr`. Classification: top-1 accuracy reported as both `acc{C}`
/// and `acc2`, plus weighted `f1`. Accuracies and F1 are percentages.
pub fn task_metrics(predictions: &[Label], labels: &[Label], settings: &MetricSettings) -> Result<MetricSet> {
    if predictions.is_empty() {
        return Err(Error::Empty("no predictions to score"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::shape("task_metrics", labels.len(), predictions.len()));
    }
    let n = labels.len();
    let mut set = MetricSet::default();
    match settings.task {
        Task::Classification => {
            let as_class = |l: &Label| match *l {
                Label::Class(c) if c < settings.classes.max(1) => Ok(c),
                other => Err(Error::Label(format!("{other:?} is not a class below {}", settings.classes))),
            };
            let pred: Vec<usize> = predictions.iter().map(as_class).collect::<Result<_>>()?;
            let truth: Vec<usize> = labels.iter().map(as_class).collect::<Result<_>>()?;
            let acc = pct(pred.iter().zip(&truth).filter(|(p, y)| p == y).count(), n);
            set.values.insert(format!("acc{}", settings.classes), acc);
            set.values.insert("acc2".into(), acc);
            set.values.insert("f1".into(), weighted_f1(&pred, &truth));
        }
        Task::Regression => {
            let pred: Vec<f64> = predictions.iter().map(|l| l.as_f64()).collect();
            let truth: Vec<f64> = labels.iter().map(|l| l.as_f64()).collect();
            let k = settings.acc_bins.max(1);
            let range = settings.label_range;
            let bins_hit = pred
                .iter()
                .zip(&truth)
                .filter(|(p, y)| bin_index(**p, range, k) == bin_index(**y, range, k))
                .count();
            set.values.insert(format!("acc{k}"), pct(bins_hit, n));
            let mid = 0.5 * (range[0] + range[1]);
            let pb: Vec<usize> = pred.iter().map(|&v| usize::from(v >= mid)).collect();
            let yb: Vec<usize> = truth.iter().map(|&v| usize::from(v >= mid)).collect();
            set.values
                .insert("acc2".into(), pct(pb.iter().zip(&yb).filter(|(p, y)| p == y).count(), n));
            set.values.insert("f1".into(), weighted_f1(&pb, &yb));
            let mae = pred.iter().zip(&truth).map(|(p, y)| (p - y).abs()).sum::<f64>() / n as f64;
            set.values.insert("mae".into(), mae);
            let corr = pearson(&pred, &truth).unwrap_or_else(|| {
                set.flags.push("corr_undefined_zero_variance".into());
                0.0
            });
            set.values.insert("corr".into(), corr);
        }
    }
    Ok(set)
}

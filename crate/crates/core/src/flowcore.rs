//! Adaptive relaxed rectified flow: interpolation, margin-aware pair
//! sampling, the hinged forward objective, the cyclic backward objective and
//! multi-step Euler transport.

use serde::{Deserialize, Serialize};

use crate::driftnet::{Direction, DriftCache, DriftModel};
use crate::modality::{Label, Modality, Task};
use crate::numkit::{euclidean, Matrix, MlpGrads, Scalar, SeededRng};
use crate::{Error, Result};

/// Flow hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    /// Base margin for cross-sample pairs.
    pub epsilon: f64,
    /// Cross-sample pairs per same-sample pair.
    pub beta: usize,
    pub euler_steps: usize,
    pub task: Task,
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be finite and >= 0, got {}", self.epsilon)));
        }
        if self.euler_steps == 0 {
            return Err(Error::Config("euler_steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// `(1 − t)·x1 + t·x2`.
pub fn interpolate<T: Scalar>(x1: &[T], x2: &[T], t: T) -> Result<Vec<T>> {
    if x1.len() != x2.len() {
        return Err(Error::shape("interpolate", x1.len(), x2.len()));
    }
    Ok(x1.iter().zip(x2).map(|(&a, &b)| (T::one() - t) * a + t * b).collect())
}

fn interpolate_rows<T: Scalar>(from: &Matrix<T>, to: &Matrix<T>, times: &[T]) -> Result<Matrix<T>> {
    from.check_same_shape(to, "interpolate_rows")?;
    let mut out = Matrix::zeros(from.rows(), from.cols());
    for (r, &t) in times.iter().enumerate() {
        for ((o, &a), &b) in out.row_mut(r).iter_mut().zip(from.row(r)).zip(to.row(r)) {
            *o = (T::one() - t) * a + t * b;
        }
    }
    Ok(out)
}

/// Alignment margin: zero for a same-sample pair, otherwise
/// `epsilon + ‖y_i − y_j‖²` (class distance is 0 or 1).
pub fn margin(y_i: Label, y_j: Label, same_sample: bool, epsilon: f64) -> f64 {
    if same_sample {
        0.0
    } else {
        epsilon + y_i.distance_sq(y_j)
    }
}

/// One source/target pairing. `src`/`tgt` index rows of the minibatch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowPair<T = f64> {
    pub src: usize,
    pub tgt: usize,
    pub eta: T,
    pub t: T,
    pub same_sample: bool,
}

/// Pairs for one source→target forward loss, with gathered features.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBatch<T = f64> {
    pub pairs: Vec<FlowPair<T>>,
    pub source: Modality,
    pub target: Modality,
    /// Source feature of each pair, `[pairs × d]`.
    pub x_src: Matrix<T>,
    /// Target feature of each pair, `[pairs × d]`.
    pub x_tgt: Matrix<T>,
    /// Times a single-sample minibatch could not supply cross-sample pairs.
    pub warnings: usize,
}

impl<T: Scalar> PairBatch<T> {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn same_sample_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.same_sample).count()
    }

    pub fn times(&self) -> Vec<T> {
        self.pairs.iter().map(|p| p.t).collect()
    }

    /// Same pairs with every margin forced to zero.
    pub fn without_margins(&self) -> Self {
        let mut out = self.clone();
        out.pairs.iter_mut().for_each(|p| p.eta = T::zero());
        out
    }
}

/// Builds every same-sample pair of the minibatch plus `beta·B` cross-sample
/// pairs drawn uniformly over ordered `(i, j)`, `i ≠ j`. Each pair gets its
/// margin and an independent `t ~ U[0, 1)`.
#[allow(clippy::too_many_arguments)]
pub fn sample_pairs<T: Scalar>(
    src_feats: &Matrix<T>,
    tgt_feats: &Matrix<T>,
    labels: &[Label],
    source: Modality,
    target: Modality,
    config: &FlowConfig,
    rng: &mut SeededRng,
) -> Result<PairBatch<T>> {
    src_feats.check_same_shape(tgt_feats, "sample_pairs")?;
    let b = src_feats.rows();
    if labels.len() != b {
        return Err(Error::shape("sample_pairs labels", b, labels.len()));
    }
    let mut pairs = Vec::with_capacity(b * (1 + config.beta));
    for i in 0..b {
        pairs.push(FlowPair {
            src: i,
            tgt: i,
            eta: T::zero(),
            t: T::lit(rng.uniform()),
            same_sample: true,
        });
    }
    let mut warnings = 0;
    if config.beta > 0 {
        if b < 2 {
            warnings += 1;
        } else {
            for _ in 0..config.beta * b {
                let i = rng.below(b);
                let mut j = rng.below(b - 1);
                if j >= i {
                    j += 1;
                }
                pairs.push(FlowPair {
                    src: i,
                    tgt: j,
                    eta: T::lit(margin(labels[i], labels[j], false, config.epsilon)),
                    t: T::lit(rng.uniform()),
                    same_sample: false,
                });
            }
        }
    }
    let src_idx: Vec<usize> = pairs.iter().map(|p| p.src).collect();
    let tgt_idx: Vec<usize> = pairs.iter().map(|p| p.tgt).collect();
    Ok(PairBatch {
        x_src: src_feats.gather_rows(&src_idx),
        x_tgt: tgt_feats.gather_rows(&tgt_idx),
        pairs,
        source,
        target,
        warnings,
    })
}

/// Loss value with gradients for the drift model that produced it.
#[derive(Debug, Clone)]
pub struct ForwardLoss<T = f64> {
    pub loss: T,
    pub grads: MlpGrads<T>,
    /// Pairs whose hinge was active.
    pub active: usize,
}

/// Hinged flow-matching loss
/// `mean_p max(‖V(x_p^t, t_p) − (x_tgt − x_src)‖² − η_p, 0)`.
///
/// Pair features are constants here: only the drift parameters receive
/// gradient.
pub fn forward_loss<T: Scalar>(drift: &DriftModel<T>, batch: &PairBatch<T>) -> Result<ForwardLoss<T>> {
    if drift.direction() != Direction::Forward {
        return Err(Error::Config("forward loss needs a forward drift model".into()));
    }
    if batch.is_empty() {
        return Err(Error::Empty("pair batch"));
    }
    let times = batch.times();
    let x_t = interpolate_rows(&batch.x_src, &batch.x_tgt, &times)?;
    let (velocity, cache) = drift.forward(&x_t, &times)?;
    let n = T::from_usize(batch.len()).unwrap();
    let mut grad_out = Matrix::zeros(velocity.rows(), velocity.cols());
    let mut total = T::zero();
    let mut active = 0;
    for (p, pair) in batch.pairs.iter().enumerate() {
        let v = velocity.row(p);
        let (xs, xt) = (batch.x_src.row(p), batch.x_tgt.row(p));
        let mut sq = T::zero();
        for k in 0..v.len() {
            let r = v[k] - (xt[k] - xs[k]);
            sq += r * r;
        }
        let excess = sq - pair.eta;
        if excess > T::zero() {
            total += excess;
            active += 1;
            let g = grad_out.row_mut(p);
            for k in 0..v.len() {
                g[k] = T::lit(2.0) * (v[k] - (xt[k] - xs[k])) / n;
            }
        }
    }
    let (_, grads) = drift.backward(&cache, &grad_out)?;
    Ok(ForwardLoss {
        loss: total / n,
        grads,
        active,
    })
}

/// Plain least-squares flow-matching loss `mean ‖V(x^t, t) − (x_tgt − x_src)‖²`
/// on the same pairs, ignoring margins.
pub fn matching_loss<T: Scalar>(drift: &DriftModel<T>, batch: &PairBatch<T>) -> Result<T> {
    if batch.is_empty() {
        return Err(Error::Empty("pair batch"));
    }
    let times = batch.times();
    let x_t = interpolate_rows(&batch.x_src, &batch.x_tgt, &times)?;
    let velocity = drift.eval_rows(&x_t, &times)?;
    let mut total = T::zero();
    for p in 0..batch.len() {
        let (v, xs, xt) = (velocity.row(p), batch.x_src.row(p), batch.x_tgt.row(p));
        let mut sq = T::zero();
        for k in 0..v.len() {
            let r = v[k] - (xt[k] - xs[k]);
            sq += r * r;
        }
        total += sq;
    }
    Ok(total / T::from_usize(batch.len()).unwrap())
}

/// Euler trajectory with the drift evaluations needed for backpropagation.
#[derive(Debug, Clone)]
pub struct EulerTrace<T = f64> {
    /// `steps + 1` states, starting at the input.
    pub states: Vec<Matrix<T>>,
    caches: Vec<DriftCache<T>>,
}

impl<T: Scalar> EulerTrace<T> {
    pub fn endpoint(&self) -> &Matrix<T> {
        self.states.last().expect("at least the initial state")
    }

    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }
}

fn step_time<T: Scalar>(k: usize, steps: usize) -> T {
    T::lit(k as f64 / steps as f64)
}

/// Integrates `dx = V(x, t) dt` from `t = 0` to `1` with `steps` Euler steps:
/// `x_{k+1} = x_k + V(x_k, k/N) / N`. Only the source features enter.
pub fn euler_map<T: Scalar>(drift: &DriftModel<T>, x0: &Matrix<T>, steps: usize) -> Result<EulerTrace<T>> {
    if steps == 0 {
        return Err(Error::Config("euler_steps must be >= 1".into()));
    }
    let dt = T::one() / T::from_usize(steps).unwrap();
    let mut states = Vec::with_capacity(steps + 1);
    let mut caches = Vec::with_capacity(steps);
    states.push(x0.clone());
    for k in 0..steps {
        let current = &states[k];
        let (v, cache) = drift.forward(current, &vec![step_time(k, steps); current.rows()])?;
        let mut next = current.clone();
        next.axpy(dt, &v)?;
        states.push(next);
        caches.push(cache);
    }
    Ok(EulerTrace { states, caches })
}

/// Endpoint of [`euler_map`] without recording caches.
pub fn euler_endpoint<T: Scalar>(drift: &DriftModel<T>, x0: &Matrix<T>, steps: usize) -> Result<Matrix<T>> {
    if steps == 0 {
        return Err(Error::Config("euler_steps must be >= 1".into()));
    }
    let dt = T::one() / T::from_usize(steps).unwrap();
    let mut x = x0.clone();
    for k in 0..steps {
        let v = drift.eval(&x, step_time(k, steps))?;
        x.axpy(dt, &v)?;
    }
    Ok(x)
}

/// Backpropagates `grad_end` (gradient w.r.t. the endpoint) through an
/// Euler trace. Returns the gradient w.r.t. the initial state and the drift
/// parameter gradients.
pub fn euler_backward<T: Scalar>(drift: &DriftModel<T>, trace: &EulerTrace<T>, grad_end: &Matrix<T>) -> Result<(Matrix<T>, MlpGrads<T>)> {
    grad_end.check_same_shape(trace.endpoint(), "euler_backward")?;
    let dt = T::one() / T::from_usize(trace.steps()).unwrap();
    let mut grads = MlpGrads::zeros_like(drift.net());
    let mut g = grad_end.clone();
    for cache in trace.caches.iter().rev() {
        let scaled = g.scale(dt);
        let (gx, gp) = drift.backward(cache, &scaled)?;
        grads.add_assign(&gp)?;
        g.add_assign(&gx)?;
    }
    Ok((g, grads))
}

/// Cyclic loss with gradients for the backward drift and the mapped features.
#[derive(Debug, Clone)]
pub struct BackwardLoss<T = f64> {
    pub loss: T,
    pub grads: MlpGrads<T>,
    /// Gradient w.r.t. the forward-mapped features.
    pub grad_mapped: Matrix<T>,
    /// Gradient w.r.t. the original source features: always zero, the
    /// source side is a constant of this loss.
    pub grad_src: Matrix<T>,
}

/// `mean_i ‖V̂(x̂_i^t, t_i) − (x_src_i − x_mapped_i)‖²` with
/// `x̂^t = (1 − t)·x_mapped + t·x_src`, same-sample pairs only.
pub fn backward_loss<T: Scalar>(
    drift_hat: &DriftModel<T>,
    x_src: &Matrix<T>,
    x_mapped: &Matrix<T>,
    rng: &mut SeededRng,
) -> Result<BackwardLoss<T>> {
    if drift_hat.direction() != Direction::Backward {
        return Err(Error::Config("backward loss needs a backward drift model".into()));
    }
    x_src.check_same_shape(x_mapped, "backward_loss")?;
    if x_src.rows() == 0 {
        return Err(Error::Empty("backward loss batch"));
    }
    let times: Vec<T> = (0..x_src.rows()).map(|_| T::lit(rng.uniform())).collect();
    let x_hat = interpolate_rows(x_mapped, x_src, &times)?;
    let (velocity, cache) = drift_hat.forward(&x_hat, &times)?;
    let n = T::from_usize(x_src.rows()).unwrap();
    let two = T::lit(2.0);
    let mut residual = velocity;
    for r in 0..residual.rows() {
        for ((v, &s), &m) in residual.row_mut(r).iter_mut().zip(x_src.row(r)).zip(x_mapped.row(r)) {
            *v -= s - m;
        }
    }
    let loss = residual.sum_squares() / n;
    let grad_v = residual.scale(two / n);
    let (grad_x_hat, grads) = drift_hat.backward(&cache, &grad_v)?;
    // x_mapped enters through x̂ (weight 1 − t) and through the target (sign +1)
    let mut grad_mapped = grad_v;
    for (r, &t) in times.iter().enumerate() {
        for (g, &gh) in grad_mapped.row_mut(r).iter_mut().zip(grad_x_hat.row(r)) {
            *g += (T::one() - t) * gh;
        }
    }
    Ok(BackwardLoss {
        loss,
        grads,
        grad_mapped,
        grad_src: Matrix::zeros(x_src.rows(), x_src.cols()),
    })
}

/// Ratio of summed path length to summed chord length over a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Straightness {
    /// `≥ 1`; `+∞` when the chords vanish.
    pub ratio: f64,
    /// Set when every chord has zero length.
    pub degenerate: bool,
}

pub fn straightness_ratio<T: Scalar>(trajectory: &[Matrix<T>]) -> Result<Straightness> {
    if trajectory.len() < 2 {
        return Err(Error::Empty("trajectory needs at least two states"));
    }
    let first = &trajectory[0];
    if let Some(bad) = trajectory.iter().find(|s| s.shape() != first.shape()) {
        return Err(Error::shape(
            "straightness_ratio",
            format!("{:?}", first.shape()),
            format!("{:?}", bad.shape()),
        ));
    }
    let last = &trajectory[trajectory.len() - 1];
    let mut path = 0.0;
    let mut chord = 0.0;
    for r in 0..first.rows() {
        for w in trajectory.windows(2) {
            path += euclidean(w[0].row(r), w[1].row(r)).to_f64_lossy();
        }
        chord += euclidean(first.row(r), last.row(r)).to_f64_lossy();
    }
    if chord == 0.0 {
        return Ok(Straightness {
            ratio: f64::INFINITY,
            degenerate: true,
        });
    }
    Ok(Straightness {
        ratio: path / chord,
        degenerate: false,
    })
}

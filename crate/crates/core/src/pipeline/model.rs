use serde::{Deserialize, Serialize};

use super::RunConfig;
use crate::driftnet::{Direction, DriftModel};
use crate::flowcore::{backward_loss, euler_backward, euler_endpoint, euler_map, forward_loss, sample_pairs, EulerTrace};
use crate::modality::{Label, Modality, Task};
use crate::numkit::{Activation, Matrix, Mlp, MlpCache, MlpGrads, SeededRng};
use crate::synthdata::Sample;
use crate::{Error, Result};

/// Widths that fix the architecture of a [`ModelBundle`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleDims {
    /// Shared latent width.
    pub d: usize,
    /// Raw input width per modality, indexed by [`Modality::index`].
    pub raw: [usize; 3],
    pub task: Task,
    /// Predictor output width: class count, or 1 for regression.
    pub out: usize,
}

impl BundleDims {
    pub fn new(d: usize, raw: [usize; 3], task: Task, classes: usize) -> Self {
        let out = match task {
            Task::Classification => classes,
            Task::Regression => 1,
        };
        Self { d, raw, task, out }
    }
}

/// All trainable networks of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub dims: BundleDims,
    /// Per-modality encoders `d_m → d`.
    pub encoders: [Mlp; 3],
    /// Forward drifts for a→l and v→l.
    pub forward: [DriftModel; 2],
    /// Backward drifts mapping transported a and v features back.
    pub backward: [DriftModel; 2],
    /// `3d → d` fusion over `[X_l | X_{a,l} | X_{v,l}]`.
    pub fusion: Mlp,
    /// `d → out` prediction head.
    pub predictor: Mlp,
}

/// Index of a source modality among the two transported ones.
fn source_slot(m: Modality) -> usize {
    match m {
        Modality::Acoustic => 0,
        Modality::Visual => 1,
        Modality::Language => panic!("language is the transport target"),
    }
}

impl ModelBundle {
    pub fn init(dims: BundleDims, rng: &mut SeededRng) -> Result<Self> {
        if dims.d == 0 || !dims.d.is_multiple_of(2) {
            return Err(Error::Config(format!("d must be even and positive, got {}", dims.d)));
        }
        if dims.out == 0 {
            return Err(Error::Config("predictor needs at least one output".into()));
        }
        let d = dims.d;
        let tanh_id = [Activation::Tanh, Activation::Identity];
        let encoders = [
            Mlp::init(&[dims.raw[0], d, d], &tanh_id, rng)?,
            Mlp::init(&[dims.raw[1], d, d], &tanh_id, rng)?,
            Mlp::init(&[dims.raw[2], d, d], &tanh_id, rng)?,
        ];
        let forward = [
            DriftModel::new(d, Direction::Forward, rng)?,
            DriftModel::new(d, Direction::Forward, rng)?,
        ];
        let backward = [
            DriftModel::new(d, Direction::Backward, rng)?,
            DriftModel::new(d, Direction::Backward, rng)?,
        ];
        let fusion = Mlp::init(&[3 * d, d, d], &tanh_id, rng)?;
        let predictor = Mlp::init(&[d, d, dims.out], &tanh_id, rng)?;
        Ok(Self {
            dims,
            encoders,
            forward,
            backward,
            fusion,
            predictor,
        })
    }

    pub fn encoder(&self, m: Modality) -> &Mlp {
        &self.encoders[m.index()]
    }

    pub fn forward_drift(&self, source: Modality) -> &DriftModel {
        &self.forward[source_slot(source)]
    }

    pub fn backward_drift(&self, source: Modality) -> &DriftModel {
        &self.backward[source_slot(source)]
    }

    /// Networks with their checkpoint prefixes, in canonical order.
    pub fn networks(&self) -> Vec<(String, &Mlp)> {
        let mut out: Vec<(String, &Mlp)> = Vec::with_capacity(9);
        for m in Modality::ALL {
            out.push((format!("encoder/{m}"), &self.encoders[m.index()]));
        }
        for (dir, drifts) in [("forward", &self.forward), ("backward", &self.backward)] {
            for m in Modality::SOURCES {
                out.push((format!("{dir}/{}", m.mapping_key()), drifts[source_slot(m)].net()));
            }
        }
        out.push(("fusion".into(), &self.fusion));
        out.push(("predictor".into(), &self.predictor));
        out
    }

    /// Mutable networks in the same order as [`ModelBundle::networks`].
    pub fn networks_mut(&mut self) -> Vec<&mut Mlp> {
        let [ea, ev, el] = &mut self.encoders;
        let [fa, fv] = &mut self.forward;
        let [ba, bv] = &mut self.backward;
        vec![
            ea,
            ev,
            el,
            fa.net_mut(),
            fv.net_mut(),
            ba.net_mut(),
            bv.net_mut(),
            &mut self.fusion,
            &mut self.predictor,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.networks().iter().map(|(_, n)| n.param_count()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.networks().iter().flat_map(|(_, n)| n.to_flat()).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::shape("ModelBundle::set_flat", self.param_count(), flat.len()));
        }
        let mut pos = 0;
        for net in self.networks_mut() {
            pos += net.set_flat(&flat[pos..])?;
        }
        Ok(())
    }

    /// Human-readable location of flat parameter `index`, e.g.
    /// `forward/a2l/layer1/W[3,0]`.
    pub fn param_name(&self, mut index: usize) -> String {
        for (name, net) in self.networks() {
            for (k, layer) in net.layers().iter().enumerate() {
                let w = layer.weight.as_slice().len();
                if index < w {
                    let (r, c) = (index / layer.weight.cols(), index % layer.weight.cols());
                    return format!("{name}/layer{k}/W[{r},{c}]");
                }
                index -= w;
                if index < layer.bias.len() {
                    return format!("{name}/layer{k}/b[{index}]");
                }
                index -= layer.bias.len();
            }
        }
        format!("<out of range +{index}>")
    }

    pub fn is_finite(&self) -> bool {
        self.networks().iter().all(|(_, n)| n.is_finite())
    }
}

/// Gradients for every network of a bundle, same order as the bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleGrads {
    pub encoders: [MlpGrads; 3],
    pub forward: [MlpGrads; 2],
    pub backward: [MlpGrads; 2],
    pub fusion: MlpGrads,
    pub predictor: MlpGrads,
}

impl BundleGrads {
    pub fn zeros_like(b: &ModelBundle) -> Self {
        Self {
            encoders: b.encoders.each_ref().map(MlpGrads::zeros_like),
            forward: b.forward.each_ref().map(|d| MlpGrads::zeros_like(d.net())),
            backward: b.backward.each_ref().map(|d| MlpGrads::zeros_like(d.net())),
            fusion: MlpGrads::zeros_like(&b.fusion),
            predictor: MlpGrads::zeros_like(&b.predictor),
        }
    }

    pub fn all(&self) -> Vec<&MlpGrads> {
        let mut out: Vec<&MlpGrads> = self.encoders.iter().collect();
        out.extend(self.forward.iter());
        out.extend(self.backward.iter());
        out.push(&self.fusion);
        out.push(&self.predictor);
        out
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.all().into_iter().flat_map(|g| g.to_flat()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.all().iter().all(|g| g.is_finite())
    }
}

/// A minibatch: raw features per modality and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub u: [Matrix; 3],
    pub labels: Vec<Label>,
}

impl Batch {
    pub fn from_samples<'a>(samples: impl IntoIterator<Item = &'a Sample>) -> Result<Self> {
        let samples: Vec<&Sample> = samples.into_iter().collect();
        if samples.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let u = Modality::ALL.map(|m| Matrix::from_rows(&samples.iter().map(|s| s.features(m)).collect::<Vec<_>>()));
        let [a, v, l] = u;
        Ok(Self {
            u: [a?, v?, l?],
            labels: samples.iter().map(|s| s.y).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Features produced by [`forward_pass`].
#[derive(Debug, Clone, PartialEq)]
pub struct Intermediates {
    /// Encoded unimodal features `X_m`.
    pub x: [Matrix; 3],
    /// `X_{a,l}` and `X_{v,l}`; equal to `X_a`, `X_v` without alignment.
    pub mapped: [Matrix; 2],
    /// Which encoded modality fed each transport (a→l, v→l); `None` when
    /// alignment is disabled.
    pub transport_inputs: [Option<Modality>; 2],
    pub fused: Matrix,
}

struct ForwardState {
    enc_caches: Vec<MlpCache>,
    traces: Option<[EulerTrace; 2]>,
    fusion_cache: MlpCache,
    predictor_cache: MlpCache,
    inter: Intermediates,
    predictions: Matrix,
}

fn run_forward(bundle: &ModelBundle, batch: &Batch, cfg: &RunConfig) -> Result<ForwardState> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let mut xs = Vec::with_capacity(3);
    let mut enc_caches = Vec::with_capacity(3);
    for m in Modality::ALL {
        let (x, cache) = bundle.encoder(m).forward(&batch.u[m.index()])?;
        xs.push(x);
        enc_caches.push(cache);
    }
    let x: [Matrix; 3] = xs.try_into().expect("three modalities");
    let (mapped, traces, transport_inputs) = if cfg.effective().align {
        let traces = Modality::SOURCES.map(|m| euler_map(bundle.forward_drift(m), &x[m.index()], cfg.euler_steps));
        let [ta, tv] = traces;
        let traces = [ta?, tv?];
        let mapped = traces.each_ref().map(|t| t.endpoint().clone());
        (mapped, Some(traces), Modality::SOURCES.map(Some))
    } else {
        (Modality::SOURCES.map(|m| x[m.index()].clone()), None, [None, None])
    };
    let fusion_in = Matrix::hconcat_all(&[&x[Modality::Language.index()], &mapped[0], &mapped[1]])?;
    let (fused, fusion_cache) = bundle.fusion.forward(&fusion_in)?;
    let (predictions, predictor_cache) = bundle.predictor.forward(&fused)?;
    Ok(ForwardState {
        enc_caches,
        traces,
        fusion_cache,
        predictor_cache,
        inter: Intermediates {
            x,
            mapped,
            transport_inputs,
            fused,
        },
        predictions,
    })
}

/// Encodes, transports a and v onto language with `euler_steps` Euler steps,
/// fuses `[X_l | X_{a,l} | X_{v,l}]` and predicts.
pub fn forward_pass(bundle: &ModelBundle, batch: &Batch, cfg: &RunConfig) -> Result<(Matrix, Intermediates)> {
    let state = run_forward(bundle, batch, cfg)?;
    Ok((state.predictions, state.inter))
}

/// Task loss and its gradient w.r.t. the predictions: mean squared error for
/// regression, mean softmax cross-entropy for classification.
pub fn main_loss(predictions: &Matrix, labels: &[Label], task: Task) -> Result<(f64, Matrix)> {
    let n = labels.len();
    if predictions.rows() != n || n == 0 {
        return Err(Error::shape("main_loss", n, predictions.rows()));
    }
    let mut grad = Matrix::zeros(n, predictions.cols());
    let mut total = 0.0;
    match task {
        Task::Regression => {
            if predictions.cols() != 1 {
                return Err(Error::shape("main_loss regression output", 1, predictions.cols()));
            }
            for (i, y) in labels.iter().enumerate() {
                let Label::Value(y) = *y else {
                    return Err(Error::Label(format!("{y:?} in a regression task")));
                };
                let r = predictions[(i, 0)] - y;
                total += r * r;
                grad[(i, 0)] = 2.0 * r / n as f64;
            }
        }
        Task::Classification => {
            let classes = predictions.cols();
            for (i, y) in labels.iter().enumerate() {
                let c = match *y {
                    Label::Class(c) if c < classes => c,
                    other => return Err(Error::Label(format!("{other:?} outside {classes} classes"))),
                };
                let logits = predictions.row(i);
                let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
                let sum: f64 = exps.iter().sum();
                total += sum.ln() + max - logits[c];
                for (k, g) in grad.row_mut(i).iter_mut().enumerate() {
                    let p = exps[k] / sum;
                    *g = (p - if k == c { 1.0 } else { 0.0 }) / n as f64;
                }
            }
        }
    }
    Ok((total / n as f64, grad))
}

/// Multipliers on the three kinds of loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub main: f64,
    pub alpha_f: f64,
    pub alpha_b: f64,
}

impl LossWeights {
    pub fn from_config(cfg: &RunConfig) -> Self {
        let e = cfg.effective();
        Self {
            main: 1.0,
            alpha_f: e.alpha_f,
            alpha_b: e.alpha_b,
        }
    }
}

/// Unweighted loss terms and the weighted total.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub main: f64,
    /// Forward (hinged) losses for a→l and v→l.
    pub forward: [f64; 2],
    /// Backward (cyclic) losses for a→l and v→l.
    pub backward: [f64; 2],
}

/// `L_total = L + Σ_{m∈{a,v}} (α_f·L^f_m + α_b·L^b_m)` with the ablation flags
/// applied, and gradients for every parameter.
pub fn total_loss(bundle: &ModelBundle, batch: &Batch, cfg: &RunConfig, rng: &mut SeededRng) -> Result<(LossBreakdown, BundleGrads)> {
    weighted_objective(bundle, batch, cfg, LossWeights::from_config(cfg), rng)
}

/// [`total_loss`] with explicit term weights.
///
/// Gradient routing: the forward loss sees its pair features as constants and
/// updates only the forward drift. The backward loss treats the source
/// features as constants but backpropagates through the transported features
/// into the forward drift and, unless `detach_main_path` is set, the encoder.
pub fn weighted_objective(
    bundle: &ModelBundle,
    batch: &Batch,
    cfg: &RunConfig,
    weights: LossWeights,
    rng: &mut SeededRng,
) -> Result<(LossBreakdown, BundleGrads)> {
    let state = run_forward(bundle, batch, cfg)?;
    let mut grads = BundleGrads::zeros_like(bundle);
    let mut out = LossBreakdown::default();

    let (main, mut grad_pred) = main_loss(&state.predictions, &batch.labels, bundle.dims.task)?;
    out.main = main;
    grad_pred.scale_in_place(weights.main);
    let (grad_fused, g) = bundle.predictor.backward(&state.predictor_cache, &grad_pred)?;
    grads.predictor = g;
    let (grad_fusion_in, g) = bundle.fusion.backward(&state.fusion_cache, &grad_fused)?;
    grads.fusion = g;

    let d = bundle.dims.d;
    let mut grad_x: [Matrix; 3] = std::array::from_fn(|_| Matrix::zeros(batch.len(), d));
    grad_x[Modality::Language.index()] = grad_fusion_in.col_slice(0, d)?;
    let mut grad_mapped = [grad_fusion_in.col_slice(d, 2 * d)?, grad_fusion_in.col_slice(2 * d, 3 * d)?];

    let inter = &state.inter;
    match &state.traces {
        Some(traces) => {
            let effective = cfg.effective();
            let flow_cfg = cfg.flow_config(bundle.dims.task);
            let x_l = &inter.x[Modality::Language.index()];
            for (slot, m) in Modality::SOURCES.into_iter().enumerate() {
                let x_m = &inter.x[m.index()];
                let mut pairs = sample_pairs(x_m, x_l, &batch.labels, m, Modality::Language, &flow_cfg, rng)?;
                if !effective.adaptive {
                    pairs = pairs.without_margins();
                }
                let fl = forward_loss(&bundle.forward[slot], &pairs)?;
                out.forward[slot] = fl.loss;
                grads.forward[slot].axpy(weights.alpha_f, &fl.grads)?;

                let bl = backward_loss(&bundle.backward[slot], x_m, &inter.mapped[slot], rng)?;
                out.backward[slot] = bl.loss;
                grads.backward[slot].axpy(weights.alpha_b, &bl.grads)?;
                grad_mapped[slot].axpy(weights.alpha_b, &bl.grad_mapped)?;

                let (gx, gp) = euler_backward(&bundle.forward[slot], &traces[slot], &grad_mapped[slot])?;
                grads.forward[slot].add_assign(&gp)?;
                if !cfg.detach_main_path {
                    grad_x[m.index()] = gx;
                }
            }
        }
        None => {
            let [ga, gv] = grad_mapped;
            grad_x[Modality::Acoustic.index()] = ga;
            grad_x[Modality::Visual.index()] = gv;
        }
    }

    for m in Modality::ALL {
        let (_, g) = bundle.encoder(m).backward(&state.enc_caches[m.index()], &grad_x[m.index()])?;
        grads.encoders[m.index()] = g;
    }

    out.total = weights.main * out.main
        + (0..2)
            .map(|s| weights.alpha_f * out.forward[s] + weights.alpha_b * out.backward[s])
            .sum::<f64>();
    Ok((out, grads))
}

/// Converts raw predictor outputs into labels (argmax or the scalar value).
pub fn decode_predictions(predictions: &Matrix, task: Task) -> Vec<Label> {
    predictions
        .iter_rows()
        .map(|row| match task {
            Task::Regression => Label::Value(row[0]),
            Task::Classification => Label::Class(
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                    .0,
            ),
        })
        .collect()
}

/// Value of the weighted objective with the stop-gradient points made
/// explicit: tensors that the gradient treats as constants (the forward-loss
/// inputs, the backward-loss `x_src`, and the transport input under
/// `detach_main_path`) are computed with `frozen`, everything else with
/// `live`. Differentiating this in `live` by finite differences gives the
/// quantity that [`weighted_objective`] returns analytically.
pub fn stop_gradient_objective(
    live: &ModelBundle,
    frozen: &ModelBundle,
    batch: &Batch,
    cfg: &RunConfig,
    weights: LossWeights,
    rng: &mut SeededRng,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let encode =
        |b: &ModelBundle| -> Result<Vec<Matrix>> { Modality::ALL.iter().map(|&m| b.encoder(m).predict(&batch.u[m.index()])).collect() };
    let x = encode(live)?;
    let x_const = encode(frozen)?;
    let align = cfg.effective().align;
    let mapped: Vec<Matrix> = Modality::SOURCES
        .iter()
        .map(|&m| {
            if !align {
                return Ok(x[m.index()].clone());
            }
            let input = if cfg.detach_main_path { &x_const[m.index()] } else { &x[m.index()] };
            euler_endpoint(live.forward_drift(m), input, cfg.euler_steps)
        })
        .collect::<Result<_>>()?;
    let fusion_in = Matrix::hconcat_all(&[&x[Modality::Language.index()], &mapped[0], &mapped[1]])?;
    let predictions = live.predictor.predict(&live.fusion.predict(&fusion_in)?)?;
    let mut total = weights.main * main_loss(&predictions, &batch.labels, live.dims.task)?.0;
    if align {
        let flow_cfg = cfg.flow_config(live.dims.task);
        let x_l = &x_const[Modality::Language.index()];
        for (slot, m) in Modality::SOURCES.into_iter().enumerate() {
            let x_m = &x_const[m.index()];
            let mut pairs = sample_pairs(x_m, x_l, &batch.labels, m, Modality::Language, &flow_cfg, rng)?;
            if !cfg.effective().adaptive {
                pairs = pairs.without_margins();
            }
            total += weights.alpha_f * forward_loss(&live.forward[slot], &pairs)?.loss;
            total += weights.alpha_b * backward_loss(&live.backward[slot], x_m, &mapped[slot], rng)?.loss;
        }
    }
    Ok(total)
}

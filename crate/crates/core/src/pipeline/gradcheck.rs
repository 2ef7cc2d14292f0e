//! Finite-difference verification of every analytic gradient in the model.

use serde::{Deserialize, Serialize};

use super::model::{stop_gradient_objective, weighted_objective, Batch, BundleDims, LossWeights, ModelBundle};
use super::RunConfig;
use crate::driftnet::{Direction, DriftModel};
use crate::flowcore::{backward_loss, euler_backward, euler_endpoint, euler_map, forward_loss, sample_pairs, FlowConfig};
use crate::modality::{Label, Modality, Task};
use crate::numkit::{finite_diff_grad, worst_discrepancy, Activation, Matrix, Mlp, SeededRng};
use crate::Result;

pub const GRADCHECK_STEP: f64 = 1e-5;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// Outcome of one gradient comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub params: usize,
    pub max_rel_error: f64,
    /// Parameter with the largest discrepancy.
    pub worst_coordinate: String,
    pub analytic: f64,
    pub numeric: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub step: f64,
    pub tolerance: f64,
    pub checks: Vec<CheckResult>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, Default)]
pub struct GradcheckOptions {
    pub seed: u64,
    /// Adds a perturbation to one analytic coordinate of the named check, to
    /// confirm that a wrong gradient is caught and located.
    pub corrupt: Option<(String, usize)>,
}

struct Suite<'a> {
    opts: &'a GradcheckOptions,
    checks: Vec<CheckResult>,
}

impl Suite<'_> {
    fn record(&mut self, name: &str, mut analytic: Vec<f64>, numeric: Vec<f64>, locate: impl Fn(usize) -> String) {
        if let Some((target, idx)) = &self.opts.corrupt {
            if target == name && *idx < analytic.len() {
                analytic[*idx] += 1e-2 * analytic[*idx].abs().max(1.0);
            }
        }
        let worst = worst_discrepancy(&analytic, &numeric).expect("non-empty parameter vector");
        self.checks.push(CheckResult {
            name: name.to_string(),
            params: analytic.len(),
            max_rel_error: worst.rel_error,
            worst_coordinate: locate(worst.index),
            analytic: worst.analytic,
            numeric: worst.numeric,
            passed: worst.rel_error < GRADCHECK_TOLERANCE,
        });
    }
}

fn random(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).expect("sized")
}

fn weighted_sum(y: &Matrix, w: &Matrix) -> f64 {
    y.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a * b).sum()
}

fn index_name(prefix: &str) -> impl Fn(usize) -> String + '_ {
    move |i| format!("{prefix}[{i}]")
}

/// Toy instance: raw width 3, batch of 4 and shared width `d` (even).
fn toy_batch(task: Task, rng: &mut SeededRng) -> Batch {
    let labels = (0..4)
        .map(|i| match task {
            Task::Classification => Label::Class(i % 3),
            Task::Regression => Label::Value(rng.normal()),
        })
        .collect();
    Batch {
        u: std::array::from_fn(|_| random(4, 3, rng)),
        labels,
    }
}

/// Runs every finite-difference suite: the raw MLP (width 3), drift network,
/// forward/backward losses, Euler transport, and each term of the combined
/// objective over all bundle parameters (shared width 4, batch 4).
pub fn run_gradcheck(opts: &GradcheckOptions) -> Result<GradcheckReport> {
    let mut rng = SeededRng::new(opts.seed);
    let mut suite = Suite { opts, checks: Vec::new() };
    let h = GRADCHECK_STEP;

    // raw two-layer MLP at width 3
    let mlp = Mlp::init(&[3, 3, 3], &[Activation::Tanh, Activation::Identity], &mut rng)?;
    let x = random(4, 3, &mut rng);
    let w = random(4, 3, &mut rng);
    let (_, cache) = mlp.forward(&x)?;
    let (_, g) = mlp.backward(&cache, &w)?;
    let numeric = finite_diff_grad(
        |p: &[f64]| {
            let mut n = mlp.clone();
            n.set_flat(p).expect("sized");
            weighted_sum(&n.predict(&x).expect("shape"), &w)
        },
        &mlp.to_flat(),
        h,
    )?;
    suite.record("numkit/mlp", g.to_flat(), numeric, index_name("mlp"));

    let d = 4;
    let drift = DriftModel::new(d, Direction::Forward, &mut rng)?;
    let xs = random(4, d, &mut rng);
    let times: Vec<f64> = (0..4).map(|_| rng.uniform()).collect();
    let w = random(4, d, &mut rng);
    let (_, cache) = drift.forward(&xs, &times)?;
    let (gx, g) = drift.backward(&cache, &w)?;
    let with_params = |p: &[f64]| {
        let mut m = drift.clone();
        m.net_mut().set_flat(p).expect("sized");
        m
    };
    let numeric = finite_diff_grad(
        |p: &[f64]| weighted_sum(&with_params(p).eval_rows(&xs, &times).expect("shape"), &w),
        &drift.net().to_flat(),
        h,
    )?;
    suite.record("driftnet/params", g.to_flat(), numeric, index_name("drift"));
    let numeric = finite_diff_grad(
        |p: &[f64]| {
            weighted_sum(
                &drift
                    .eval_rows(&Matrix::from_vec(4, d, p.to_vec()).expect("sized"), &times)
                    .expect("shape"),
                &w,
            )
        },
        xs.as_slice(),
        h,
    )?;
    suite.record("driftnet/input", gx.into_vec(), numeric, index_name("x"));

    // hinged forward loss
    let xt = random(4, d, &mut rng);
    let labels: Vec<Label> = (0..4).map(|i| Label::Class(i % 2)).collect();
    let flow = FlowConfig {
        epsilon: 0.1,
        beta: 4,
        euler_steps: 2,
        task: Task::Classification,
    };
    let pairs = sample_pairs(&xs, &xt, &labels, Modality::Acoustic, Modality::Language, &flow, &mut rng)?;
    let fl = forward_loss(&drift, &pairs)?;
    let numeric = finite_diff_grad(
        |p: &[f64]| forward_loss(&with_params(p), &pairs).expect("valid").loss,
        &drift.net().to_flat(),
        h,
    )?;
    suite.record("flowcore/forward_loss", fl.grads.to_flat(), numeric, index_name("forward_drift"));

    // Euler transport
    let trace = euler_map(&drift, &xs, 2)?;
    let (gx, g) = euler_backward(&drift, &trace, &w)?;
    let numeric = finite_diff_grad(
        |p: &[f64]| weighted_sum(&euler_endpoint(&with_params(p), &xs, 2).expect("shape"), &w),
        &drift.net().to_flat(),
        h,
    )?;
    suite.record("flowcore/euler_map/params", g.to_flat(), numeric, index_name("forward_drift"));
    let numeric = finite_diff_grad(
        |p: &[f64]| {
            weighted_sum(
                &euler_endpoint(&drift, &Matrix::from_vec(4, d, p.to_vec()).expect("sized"), 2).expect("shape"),
                &w,
            )
        },
        xs.as_slice(),
        h,
    )?;
    suite.record("flowcore/euler_map/input", gx.into_vec(), numeric, index_name("x0"));

    // cyclic backward loss
    let back = DriftModel::new(d, Direction::Backward, &mut rng)?;
    let mapped = trace.endpoint().clone();
    let loss_rng = rng.fork();
    let bl = backward_loss(&back, &xs, &mapped, &mut loss_rng.clone())?;
    let numeric = finite_diff_grad(
        |p: &[f64]| {
            let mut m = back.clone();
            m.net_mut().set_flat(p).expect("sized");
            backward_loss(&m, &xs, &mapped, &mut loss_rng.clone()).expect("valid").loss
        },
        &back.net().to_flat(),
        h,
    )?;
    suite.record(
        "flowcore/backward_loss/params",
        bl.grads.to_flat(),
        numeric,
        index_name("backward_drift"),
    );
    let numeric = finite_diff_grad(
        |p: &[f64]| {
            backward_loss(
                &back,
                &xs,
                &Matrix::from_vec(4, d, p.to_vec()).expect("sized"),
                &mut loss_rng.clone(),
            )
            .expect("valid")
            .loss
        },
        mapped.as_slice(),
        h,
    )?;
    suite.record(
        "flowcore/backward_loss/mapped",
        bl.grad_mapped.into_vec(),
        numeric,
        index_name("x_mapped"),
    );

    // combined objective over all parameters
    let terms = [
        (
            "pipeline/main_loss",
            LossWeights {
                main: 1.0,
                alpha_f: 0.0,
                alpha_b: 0.0,
            },
        ),
        (
            "pipeline/forward_loss",
            LossWeights {
                main: 0.0,
                alpha_f: 1.0,
                alpha_b: 0.0,
            },
        ),
        (
            "pipeline/backward_loss",
            LossWeights {
                main: 0.0,
                alpha_f: 0.0,
                alpha_b: 1.0,
            },
        ),
        (
            "pipeline/total_loss",
            LossWeights {
                main: 1.0,
                alpha_f: 1.0,
                alpha_b: 0.1,
            },
        ),
    ];
    for task in [Task::Classification, Task::Regression] {
        let cfg = RunConfig {
            d,
            euler_steps: 2,
            ..RunConfig::default()
        };
        let bundle = ModelBundle::init(BundleDims::new(d, [3, 3, 3], task, 3), &mut rng)?;
        let batch = toy_batch(task, &mut rng);
        let loss_rng = rng.fork();
        let suffix = match task {
            Task::Classification => "classification",
            Task::Regression => "regression",
        };
        for (name, weights) in terms {
            let (_, grads) = weighted_objective(&bundle, &batch, &cfg, weights, &mut loss_rng.clone())?;
            let numeric = finite_diff_grad(
                |p: &[f64]| {
                    let mut b = bundle.clone();
                    b.set_flat(p).expect("sized");
                    stop_gradient_objective(&b, &bundle, &batch, &cfg, weights, &mut loss_rng.clone()).expect("valid")
                },
                &bundle.to_flat(),
                h,
            )?;
            suite.record(&format!("{name}/{suffix}"), grads.to_flat(), numeric, |i| bundle.param_name(i));
        }
    }

    Ok(GradcheckReport {
        step: h,
        tolerance: GRADCHECK_TOLERANCE,
        checks: suite.checks,
    })
}

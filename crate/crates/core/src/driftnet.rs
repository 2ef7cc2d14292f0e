//! Time-conditioned velocity networks.
//!
//! A drift model evaluates `MLP([x | TE(t)])` where `TE` is the parameter-free
//! sinusoidal embedding of the flow time. Forward (source to target) and
//! backward (target back to source) flows use separate instances of the same
//! architecture.

use serde::{Deserialize, Serialize};

use crate::numkit::{Activation, Matrix, Mlp, MlpCache, MlpGrads, Scalar, SeededRng};
use crate::{Error, Result};

/// Rescaling of `t ∈ [0, 1]` into the positional-encoding frequency range.
pub const TIME_SCALE: f64 = 1000.0;
const FREQ_BASE: f64 = 10000.0;

/// Sinusoidal time embedding of even width `d`:
/// `[sin(t·1000/10000^(2i/d)), cos(t·1000/10000^(2i/d))]` for `i < d/2`.
pub fn time_embed<T: Scalar>(t: T, d: usize) -> Result<Vec<T>> {
    if !d.is_multiple_of(2) {
        return Err(Error::Config(format!("time embedding width must be even, got {d}")));
    }
    if !(t >= T::zero() && t <= T::one()) {
        return Err(Error::Config(format!("flow time {t} outside [0, 1]")));
    }
    let mut out = Vec::with_capacity(d);
    for i in 0..d / 2 {
        let freq = T::lit(TIME_SCALE / FREQ_BASE.powf((2 * i) as f64 / d as f64));
        let angle = t * freq;
        out.push(angle.sin());
        out.push(angle.cos());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }
}

/// Velocity field `V(x, t)` over features of width `dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftModel<T = f64> {
    net: Mlp<T>,
    dim: usize,
    direction: Direction,
}

/// Recorded forward evaluation for [`DriftModel::backward`].
#[derive(Debug, Clone)]
pub struct DriftCache<T = f64> {
    mlp: MlpCache<T>,
}

impl<T: Scalar> DriftModel<T> {
    /// `2d → 2d (tanh) → 2d (tanh) → d`, Xavier-initialized.
    pub fn new(dim: usize, direction: Direction, rng: &mut SeededRng) -> Result<Self> {
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::Config(format!("feature width must be even and positive, got {dim}")));
        }
        let net = Mlp::init(
            &[2 * dim, 2 * dim, 2 * dim, dim],
            &[Activation::Tanh, Activation::Tanh, Activation::Identity],
            rng,
        )?;
        Ok(Self { net, dim, direction })
    }

    /// Wraps an existing network; its input must be exactly `2·dim` wide.
    pub fn from_net(net: Mlp<T>, direction: Direction) -> Result<Self> {
        let dim = net.out_dim();
        if net.in_dim() != 2 * dim || !dim.is_multiple_of(2) {
            return Err(Error::shape(
                "DriftModel::from_net",
                format!("input width 2·{dim} with even {dim}"),
                net.in_dim(),
            ));
        }
        Ok(Self { net, dim, direction })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn net(&self) -> &Mlp<T> {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp<T> {
        &mut self.net
    }

    fn augmented_input(&self, x: &Matrix<T>, times: &[T]) -> Result<Matrix<T>> {
        if x.cols() != self.dim {
            return Err(Error::shape("drift input", self.dim, x.cols()));
        }
        if times.len() != x.rows() {
            return Err(Error::shape("drift times", x.rows(), times.len()));
        }
        let mut data = Vec::with_capacity(x.rows() * 2 * self.dim);
        let mut last: Option<(T, Vec<T>)> = None;
        for (row, &t) in x.iter_rows().zip(times) {
            let emb = match &last {
                Some((lt, e)) if *lt == t => e.clone(),
                _ => time_embed(t, self.dim)?,
            };
            data.extend_from_slice(row);
            data.extend_from_slice(&emb);
            last = Some((t, emb));
        }
        Matrix::from_vec(x.rows(), 2 * self.dim, data)
    }

    /// Velocity at a common time `t` for every row of `x`.
    pub fn eval(&self, x: &Matrix<T>, t: T) -> Result<Matrix<T>> {
        self.eval_rows(x, &vec![t; x.rows()])
    }

    /// Velocity with a separate time per row.
    pub fn eval_rows(&self, x: &Matrix<T>, times: &[T]) -> Result<Matrix<T>> {
        self.net.predict(&self.augmented_input(x, times)?)
    }

    pub fn forward(&self, x: &Matrix<T>, times: &[T]) -> Result<(Matrix<T>, DriftCache<T>)> {
        let (out, mlp) = self.net.forward(&self.augmented_input(x, times)?)?;
        Ok((out, DriftCache { mlp }))
    }

    /// Gradients w.r.t. the features (width `dim`) and the parameters. The
    /// time-embedding slice of the input gradient is dropped.
    pub fn backward(&self, cache: &DriftCache<T>, grad_out: &Matrix<T>) -> Result<(Matrix<T>, MlpGrads<T>)> {
        let (grad_in, grads) = self.net.backward(&cache.mlp, grad_out)?;
        Ok((grad_in.col_slice(0, self.dim)?, grads))
    }
}

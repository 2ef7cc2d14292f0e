use serde::{Deserialize, Serialize};

use super::{Matrix, Scalar, SeededRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, v: T) -> T {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Identity => v,
        }
    }

    /// Derivative expressed through the activated value.
    #[inline]
    fn derivative_from_output<T: Scalar>(self, out: T) -> T {
        match self {
            Activation::Tanh => T::one() - out * out,
            Activation::Identity => T::one(),
        }
    }
}

/// Dense layer `act(x·Wᵀ + b)`, with `weight` stored `[out × in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer<T = f64> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
    pub activation: Activation,
}

impl<T: Scalar> Layer<T> {
    pub fn new(weight: Matrix<T>, bias: Vec<T>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::shape("Layer::new", weight.rows(), bias.len()));
        }
        Ok(Self { weight, bias, activation })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }
}

/// Feed-forward network parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp<T = f64> {
    layers: Vec<Layer<T>>,
}

/// Activations recorded by [`Mlp::forward`] for the matching backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache<T = f64> {
    /// Input to each layer.
    inputs: Vec<Matrix<T>>,
    /// Activated output of each layer.
    outputs: Vec<Matrix<T>>,
}

impl<T: Scalar> MlpCache<T> {
    pub fn output(&self) -> &Matrix<T> {
        self.outputs.last().expect("cache of a non-empty network")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads<T = f64> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

/// Gradients with the same layout as an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads<T = f64> {
    pub layers: Vec<LayerGrads<T>>,
}

impl<T: Scalar> Mlp<T> {
    /// Assembles a network, checking that adjacent dimensions chain.
    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("MLP needs at least one layer"));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Shape {
                    context: "Mlp::from_layers",
                    layer: Some(k + 1),
                    expected: format!("input width {}", pair[0].out_dim()),
                    got: pair[1].in_dim().to_string(),
                });
            }
        }
        Ok(Self { layers })
    }

    /// Xavier-uniform weights in `±sqrt(6/(in+out))` and zero biases.
    ///
    /// `dims` lists layer widths from input to output; `activations` has one
    /// entry per layer and must end in [`Activation::Identity`].
    pub fn init(dims: &[usize], activations: &[Activation], rng: &mut SeededRng) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(Error::Config(format!(
                "{} widths need {} activations, got {}",
                dims.len(),
                dims.len().saturating_sub(1),
                activations.len()
            )));
        }
        if activations.last() != Some(&Activation::Identity) {
            return Err(Error::Config("final layer must be identity".into()));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out).map(|_| T::lit(rng.uniform_range(-bound, bound))).collect();
                Layer {
                    weight: Matrix::from_vec(fan_out, fan_in, data).expect("sized above"),
                    bias: vec![T::zero(); fan_out],
                    activation,
                }
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Zeroes the weights and bias of the output layer, making the network
    /// output identically zero (or `bias` after [`Mlp::set_output_bias`]).
    pub fn zero_output_layer(&mut self) {
        let last = self.layers.last_mut().expect("non-empty");
        last.weight.as_mut_slice().fill(T::zero());
        last.bias.fill(T::zero());
    }

    pub fn set_output_bias(&mut self, bias: &[T]) -> Result<()> {
        let last = self.layers.last_mut().expect("non-empty");
        if bias.len() != last.bias.len() {
            return Err(Error::shape("set_output_bias", last.bias.len(), bias.len()));
        }
        last.bias.copy_from_slice(bias);
        Ok(())
    }

    fn check_input(&self, x: &Matrix<T>) -> Result<()> {
        if x.cols() != self.in_dim() {
            return Err(Error::Shape {
                context: "mlp forward",
                layer: Some(0),
                expected: format!("input width {}", self.in_dim()),
                got: x.cols().to_string(),
            });
        }
        Ok(())
    }

    fn apply_layer(layer: &Layer<T>, x: &Matrix<T>) -> Matrix<T> {
        let mut z = x.matmul_t(&layer.weight).expect("widths checked");
        for r in 0..z.rows() {
            for (v, &b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                *v = layer.activation.apply(*v + b);
            }
        }
        z
    }

    /// Forward pass over a batch `[batch × in]`, keeping the activations
    /// needed by [`Mlp::backward`].
    pub fn forward(&self, x: &Matrix<T>) -> Result<(Matrix<T>, MlpCache<T>)> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        for layer in &self.layers {
            let next = Self::apply_layer(layer, &current);
            inputs.push(current);
            outputs.push(next.clone());
            current = next;
        }
        Ok((current, MlpCache { inputs, outputs }))
    }

    /// Forward pass without recording a cache.
    pub fn predict(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_input(x)?;
        let mut current = Self::apply_layer(&self.layers[0], x);
        for layer in &self.layers[1..] {
            current = Self::apply_layer(layer, &current);
        }
        Ok(current)
    }

    /// Reverse-mode gradients of the forward map recorded in `cache`, given
    /// the upstream gradient `grad_out` of shape `[batch × out]`.
    pub fn backward(&self, cache: &MlpCache<T>, grad_out: &Matrix<T>) -> Result<(Matrix<T>, MlpGrads<T>)> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::shape("mlp backward: cache depth", self.layers.len(), cache.inputs.len()));
        }
        for (k, (layer, input)) in self.layers.iter().zip(&cache.inputs).enumerate() {
            if input.cols() != layer.in_dim() {
                return Err(Error::Shape {
                    context: "mlp backward: stale cache",
                    layer: Some(k),
                    expected: format!("input width {}", layer.in_dim()),
                    got: input.cols().to_string(),
                });
            }
        }
        let out = cache.output();
        if grad_out.shape() != out.shape() {
            return Err(Error::shape(
                "mlp backward: grad_out",
                format!("{}x{}", out.rows(), out.cols()),
                format!("{}x{}", grad_out.rows(), grad_out.cols()),
            ));
        }

        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = grad_out.clone();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let activated = &cache.outputs[k];
            let mut delta = upstream;
            for (g, &a) in delta.as_mut_slice().iter_mut().zip(activated.as_slice()) {
                *g *= layer.activation.derivative_from_output(a);
            }
            let weight = delta.t_matmul(&cache.inputs[k])?;
            let mut bias = vec![T::zero(); layer.out_dim()];
            for row in delta.iter_rows() {
                for (b, &g) in bias.iter_mut().zip(row) {
                    *b += g;
                }
            }
            upstream = delta.matmul(&layer.weight)?;
            grads.push(LayerGrads { weight, bias });
        }
        grads.reverse();
        Ok((upstream, MlpGrads { layers: grads }))
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.as_slice().len() + l.bias.len()).sum()
    }

    /// Parameters flattened layer by layer: weights row-major, then biases.
    pub fn to_flat(&self) -> Vec<T> {
        let mut flat = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            flat.extend_from_slice(l.weight.as_slice());
            flat.extend_from_slice(&l.bias);
        }
        flat
    }

    /// Inverse of [`Mlp::to_flat`]; returns the number of values consumed.
    pub fn set_flat(&mut self, flat: &[T]) -> Result<usize> {
        if flat.len() < self.param_count() {
            return Err(Error::shape("Mlp::set_flat", self.param_count(), flat.len()));
        }
        let mut pos = 0;
        for l in &mut self.layers {
            let w = l.weight.as_mut_slice();
            w.copy_from_slice(&flat[pos..pos + w.len()]);
            pos += w.len();
            let n = l.bias.len();
            l.bias.copy_from_slice(&flat[pos..pos + n]);
            pos += n;
        }
        Ok(pos)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }
}

impl<T: Scalar> MlpGrads<T> {
    pub fn zeros_like(net: &Mlp<T>) -> Self {
        Self {
            layers: net
                .layers()
                .iter()
                .map(|l| LayerGrads {
                    weight: Matrix::zeros(l.out_dim(), l.in_dim()),
                    bias: vec![T::zero(); l.out_dim()],
                })
                .collect(),
        }
    }

    /// `self += alpha · other`.
    pub fn axpy(&mut self, alpha: T, other: &Self) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::shape("MlpGrads::axpy", self.layers.len(), other.layers.len()));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.axpy(alpha, &b.weight)?;
            for (x, &y) in a.bias.iter_mut().zip(&b.bias) {
                *x += alpha * y;
            }
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.axpy(T::one(), other)
    }

    pub fn scale(&mut self, alpha: T) {
        for l in &mut self.layers {
            l.weight.scale_in_place(alpha);
            l.bias.iter_mut().for_each(|b| *b *= alpha);
        }
    }

    pub fn to_flat(&self) -> Vec<T> {
        let mut flat = Vec::new();
        for l in &self.layers {
            flat.extend_from_slice(l.weight.as_slice());
            flat.extend_from_slice(&l.bias);
        }
        flat
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.as_slice().iter().all(|v| *v == T::zero()) && l.bias.iter().all(|v| *v == T::zero()))
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }
}

use super::{Mlp, MlpGrads, Scalar};
use crate::{Error, Result};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPS: f64 = 1e-8;
pub const DEFAULT_LR: f64 = 1e-3;

/// Adam moments for one network. Moment layout mirrors the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T = f64> {
    pub first: MlpGrads<T>,
    pub second: MlpGrads<T>,
    pub step: u64,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub lr: T,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(net: &Mlp<T>, lr: T) -> Self {
        Self {
            first: MlpGrads::zeros_like(net),
            second: MlpGrads::zeros_like(net),
            step: 0,
            beta1: T::lit(DEFAULT_BETA1),
            beta2: T::lit(DEFAULT_BETA2),
            eps: T::lit(DEFAULT_EPS),
            lr,
        }
    }

    /// One bias-corrected Adam update of `net` in place.
    pub fn step(&mut self, net: &mut Mlp<T>, grads: &MlpGrads<T>) -> Result<()> {
        let n = net.layers().len();
        if grads.layers.len() != n || self.first.layers.len() != n {
            return Err(Error::shape("adam step", n, grads.layers.len()));
        }
        for (k, layer) in net.layers().iter().enumerate() {
            if grads.layers[k].weight.shape() != layer.weight.shape() || self.first.layers[k].weight.shape() != layer.weight.shape() {
                return Err(Error::Shape {
                    context: "adam step",
                    layer: Some(k),
                    expected: format!("{:?}", layer.weight.shape()),
                    got: format!("{:?}", grads.layers[k].weight.shape()),
                });
            }
        }
        self.step += 1;
        let step = i32::try_from(self.step).unwrap_or(i32::MAX);
        let c1 = T::one() - self.beta1.powi(step);
        let c2 = T::one() - self.beta2.powi(step);
        for (k, layer) in net.layers_mut().iter_mut().enumerate() {
            let g = &grads.layers[k];
            let m = &mut self.first.layers[k];
            let v = &mut self.second.layers[k];
            update(
                layer.weight.as_mut_slice(),
                g.weight.as_slice(),
                m.weight.as_mut_slice(),
                v.weight.as_mut_slice(),
                (self.beta1, self.beta2, self.eps, self.lr, c1, c2),
            );
            update(
                &mut layer.bias,
                &g.bias,
                &mut m.bias,
                &mut v.bias,
                (self.beta1, self.beta2, self.eps, self.lr, c1, c2),
            );
        }
        Ok(())
    }
}

fn update<T: Scalar>(params: &mut [T], grads: &[T], m: &mut [T], v: &mut [T], (b1, b2, eps, lr, c1, c2): (T, T, T, T, T, T)) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = b1 * m[i] + (T::one() - b1) * g;
        v[i] = b2 * v[i] + (T::one() - b2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{Activation, Layer, Matrix, SeededRng};

    fn scalar_net(theta: f64) -> Mlp {
        Mlp::from_layers(vec![
            Layer::new(Matrix::row_vector(&[theta]), vec![0.0], Activation::Identity).unwrap()
        ])
        .unwrap()
    }

    fn scalar_grad(g: f64) -> MlpGrads {
        MlpGrads {
            layers: vec![crate::numkit::LayerGrads {
                weight: Matrix::row_vector(&[g]),
                bias: vec![0.0],
            }],
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut rng = SeededRng::new(0);
        let mut net = Mlp::<f64>::init(&[3, 2], &[Activation::Identity], &mut rng).unwrap();
        let before = net.clone();
        let mut state = AdamState::new(&net, 0.01);
        state.step(&mut net, &MlpGrads::zeros_like(&before)).unwrap();
        assert_eq!(net, before);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = v̂ = g on the first step, so Δθ = -lr·g/(|g| + ε)
        let mut net = scalar_net(0.5);
        let mut state = AdamState::new(&net, 0.01);
        state.step(&mut net, &scalar_grad(1.0)).unwrap();
        let delta = net.layers()[0].weight[(0, 0)] - 0.5;
        let expected = -0.01 / (1.0 + 1e-8);
        assert!((delta - expected).abs() < 1e-15, "{delta}");
    }

    #[test]
    fn identical_calls_are_bit_identical() {
        let mut a = scalar_net(0.3);
        let mut b = scalar_net(0.3);
        let mut sa = AdamState::new(&a, 0.01);
        let mut sb = AdamState::new(&b, 0.01);
        for g in [0.7, -1.3, 2.0] {
            sa.step(&mut a, &scalar_grad(g)).unwrap();
            sb.step(&mut b, &scalar_grad(g)).unwrap();
        }
        assert_eq!(a.to_flat()[0].to_bits(), b.to_flat()[0].to_bits());
        assert_eq!(sa, sb);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut net = scalar_net(0.0);
        let mut state = AdamState::new(&net, 0.01);
        let mut rng = SeededRng::new(0);
        let other = Mlp::<f64>::init(&[2, 1], &[Activation::Identity], &mut rng).unwrap();
        assert!(state.step(&mut net, &MlpGrads::zeros_like(&other)).is_err());
    }
}

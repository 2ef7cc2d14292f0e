//! Deterministic numeric kernel: dense matrices, small feed-forward networks
//! with hand-derived gradients, Adam, a portable seeded RNG and a
//! finite-difference oracle.

mod adam;
mod gradcheck;
mod matrix;
mod mlp;
mod rng;
mod scalar;

pub use adam::{AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS, DEFAULT_LR};
pub use gradcheck::{finite_diff_grad, relative_error, worst_discrepancy, GradDiscrepancy, GRADCHECK_FLOOR};
pub use matrix::{dot, euclidean, squared_distance, Matrix};
pub use mlp::{Activation, Layer, LayerGrads, Mlp, MlpCache, MlpGrads};
pub use rng::SeededRng;
pub use scalar::Scalar;

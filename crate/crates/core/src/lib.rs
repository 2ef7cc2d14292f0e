//! Cyclic adaptive rectified flow for aligning feature distributions across
//! modalities.
//!
//! Acoustic and visual features are transported onto the language feature
//! distribution by a learned, time-conditioned velocity field integrated with
//! a few Euler steps. Training combines a hinged flow-matching loss whose
//! margin grows with label distance, a backward flow that maps transported
//! features back to their source, and the downstream task loss.
//!
//! The numeric kernel ([`numkit`]), drift networks ([`driftnet`]), flow
//! mathematics ([`flowcore`]) and [`metrics`] are generic over the [`Scalar`]
//! element type; the end-to-end [`pipeline`] runs in `f64`.

pub mod driftnet;
mod error;
pub mod flowcore;
mod linalg;
pub mod metrics;
mod modality;
pub mod numkit;
pub mod pipeline;
pub mod synthdata;

pub use error::{Error, Result};
pub use modality::{Label, Modality, Task};
pub use numkit::Scalar;

pub type Matrix64 = numkit::Matrix<f64>;
pub type Matrix32 = numkit::Matrix<f32>;
pub type Mlp64 = numkit::Mlp<f64>;
pub type Mlp32 = numkit::Mlp<f32>;
pub type DriftModel64 = driftnet::DriftModel<f64>;
pub type DriftModel32 = driftnet::DriftModel<f32>;

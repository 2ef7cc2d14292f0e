//! End-to-end model: per-modality encoders, a→l and v→l transports, concat
//! fusion, prediction head, the combined objective, and training.

mod analysis;
mod checkpoint;
mod config;
pub mod gradcheck;
mod model;
mod train;

pub use analysis::{alignment_report, encode_split, AlignmentReport};
pub use checkpoint::{Checkpoint, Tensor, CHECKPOINT_FORMAT};
pub use config::{Ablation, AblationFlags, Effective, RunConfig};
pub use model::{
    decode_predictions, forward_pass, main_loss, stop_gradient_objective, total_loss, weighted_objective, Batch, BundleDims, BundleGrads,
    Intermediates, LossBreakdown, LossWeights, ModelBundle,
};
pub use train::{evaluate, init_bundle, metric_settings, train, EpochRecord, Evaluation, Splits, TrainReport};

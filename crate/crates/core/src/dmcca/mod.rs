//! Deep MCCA: one feed-forward branch per modality, trained so that the
//! top-layer activations have maximal mean inter-set correlation.

pub mod checkpoint;
mod loss;
mod network;
mod optim;
mod train;

pub use loss::{isc_loss, isc_loss_and_grad, mse_loss_and_grad, IscLossOutput};
pub use network::{mlp_specs, Activation, BranchGrads, BranchNetwork, ForwardCache, Layer, LayerSpec, Mode};
pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState};
pub use train::{
    embed, rng_stream, train_dmcca, train_supervised, DataSplit, EpochRecord, InitScheme, StopReason, TrainConfig,
    TrainRun,
};

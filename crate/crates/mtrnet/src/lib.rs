//! Sparse-window traffic reconstruction network: architecture, inference,
//! training and checkpoints.

pub mod backbone;
mod model;
mod train;

pub use backbone::{Backbone, BackboneSpec, Trace};
pub use model::{mtrnet_infer, mtrnet_init, window_input, MtrnetConfig, MtrnetModel};
pub use train::{mae_loss, mtrnet_train, EpochStats, TrainHistory, TrainHyper};

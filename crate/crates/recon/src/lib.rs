//! Classical reconstruction baselines for sparse traffic snapshots.
//!
//! All three implement [`spider_core::Reconstructor`], so they can stand in for
//! the learned model anywhere a reconstruction function is expected.

pub mod als;
mod cs;
mod knn;

pub use als::{complete_matrix, Completion, CsConfig, FactorPair, Penalties};
pub use cs::{cs_complete, stack_window, stcs_complete, Cs, CsOutcome, Stcs, StcsConfig};
pub use knn::{knn_s, KnnS};

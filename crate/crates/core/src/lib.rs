//! Domain types and data handling for sparse spatiotemporal traffic sampling.
//!
//! Everything here is a plain value type or a pure function; the reconstruction,
//! learning and benchmarking crates build on top of it.

pub mod calendar;
pub mod data;
mod error;
pub mod grid;
pub mod metrics;
pub mod norm;
mod reconstruct;
pub mod sampling;

pub use calendar::{Bucket, BucketConfig, Clock};
pub use error::{Error, Result};
pub use grid::{apply_mask, Grid, GridGeometry, SelectionMatrix, SparseMeasurement, StateWindow, TrafficSnapshot};
pub use metrics::{mae, nmae};
pub use norm::{NormStats, QualityConfig};
pub use reconstruct::Reconstructor;

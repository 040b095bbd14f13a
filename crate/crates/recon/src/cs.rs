use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use spider_core::{Grid, Reconstructor, Result, SparseMeasurement, StateWindow, TrafficSnapshot};

use crate::als::{complete_matrix, Completion, CsConfig, Penalties};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StcsConfig {
    #[serde(flatten)]
    pub cs: CsConfig,
    pub spatial_weight: f64,
    pub temporal_weight: f64,
}

impl Default for StcsConfig {
    fn default() -> Self {
        Self { cs: CsConfig::default(), spatial_weight: 0.05, temporal_weight: 0.5 }
    }
}

/// A reconstruction together with solver diagnostics.
#[derive(Debug, Clone)]
pub struct CsOutcome {
    pub estimate: TrafficSnapshot,
    pub converged: bool,
    pub iterations: usize,
    pub objective: Vec<f64>,
}

fn clipped_snapshot(t: i64, rows: usize, cols: usize, values: impl Iterator<Item = f64>) -> Result<TrafficSnapshot> {
    let data = values.map(|v| v.max(0.0)).collect();
    TrafficSnapshot::new(t, Grid::from_vec(rows, cols, data)?)
}

fn outcome(c: Completion, estimate: TrafficSnapshot) -> CsOutcome {
    CsOutcome { estimate, converged: c.converged, iterations: c.iterations, objective: c.objective }
}

/// Low-rank completion of one sparse snapshot (rows × cols matrix).
pub fn cs_complete(measurement: &SparseMeasurement, config: &CsConfig) -> Result<CsOutcome> {
    let g = measurement.geometry();
    let values = DMatrix::from_row_slice(g.rows, g.cols, measurement.values.as_slice());
    let mask = DMatrix::from_row_slice(g.rows, g.cols, measurement.mask.bits());
    let c = complete_matrix(&values, &mask, config, Penalties::default())?;
    let p = c.factors.product();
    // row-major readout of a column-major product
    let est = clipped_snapshot(measurement.t, g.rows, g.cols, (0..g.cells()).map(|k| p[(k / g.cols, k % g.cols)]))?;
    Ok(outcome(c, est))
}

/// Stacks a window into a (cells × frames) matrix and its mask.
pub fn stack_window(window: &StateWindow) -> (DMatrix<f64>, DMatrix<bool>) {
    let cells = window.geometry().cells();
    let frames = window.frames();
    let values = DMatrix::from_fn(cells, frames.len(), |i, t| frames[t].values.as_slice()[i]);
    let mask = DMatrix::from_fn(cells, frames.len(), |i, t| frames[t].mask.is_set(i));
    (values, mask)
}

/// Spatio-temporal completion of the whole window; returns the current frame.
pub fn stcs_complete(window: &StateWindow, config: &StcsConfig) -> Result<CsOutcome> {
    let g = window.geometry();
    let (values, mask) = stack_window(window);
    let pen = Penalties {
        spatial_weight: config.spatial_weight,
        grid: Some((g.rows, g.cols)),
        temporal_weight: config.temporal_weight,
    };
    let c = complete_matrix(&values, &mask, &config.cs, pen)?;
    let p = c.factors.product();
    let last = p.ncols() - 1;
    let est = clipped_snapshot(window.t(), g.rows, g.cols, (0..g.cells()).map(|i| p[(i, last)]))?;
    Ok(outcome(c, est))
}

/// CS on the current frame only.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Cs {
    pub config: CsConfig,
}

impl Reconstructor for Cs {
    fn reconstruct(&self, window: &StateWindow) -> Result<TrafficSnapshot> {
        Ok(cs_complete(window.current(), &self.config)?.estimate)
    }
}

/// STCS over the trailing `frames` frames of the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stcs {
    pub config: StcsConfig,
    pub frames: usize,
}

impl Reconstructor for Stcs {
    fn reconstruct(&self, window: &StateWindow) -> Result<TrafficSnapshot> {
        let w = if window.len() > self.frames { window.tail(self.frames)? } else { window.clone() };
        Ok(stcs_complete(&w, &self.config)?.estimate)
    }

    fn window_frames(&self) -> usize {
        self.frames
    }
}

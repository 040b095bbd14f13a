//! Reconstruction error metrics.

use crate::error::{Error, Result};
use crate::grid::TrafficSnapshot;

fn abs_error_sum(estimate: &TrafficSnapshot, truth: &TrafficSnapshot) -> Result<f64> {
    estimate.geometry().check_same(&truth.geometry(), "metric inputs")?;
    Ok(estimate
        .values
        .as_slice()
        .iter()
        .zip(truth.values.as_slice())
        .map(|(a, b)| (a - b).abs())
        .sum())
}

/// Mean absolute error over every cell of the grid.
pub fn mae(estimate: &TrafficSnapshot, truth: &TrafficSnapshot) -> Result<f64> {
    Ok(abs_error_sum(estimate, truth)? / truth.values.len() as f64)
}

/// Traffic-weighted error: `Σ|d̂ − d| / Σ|d|`.
pub fn nmae(estimate: &TrafficSnapshot, truth: &TrafficSnapshot) -> Result<f64> {
    let num = abs_error_sum(estimate, truth)?;
    let den: f64 = truth.values.as_slice().iter().map(|v| v.abs()).sum();
    if den == 0.0 {
        return Err(Error::UndefinedDenominator("NMAE of an all-zero ground truth".into()));
    }
    Ok(num / den)
}

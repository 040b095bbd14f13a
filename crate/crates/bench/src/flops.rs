//! Floating-point operation counts from layer inventories.
//!
//! Convolutions, transposed convolutions and dense layers cost
//! `2 · out_elems · kernel_volume · in_channels` (one multiply and one add
//! per weight tap). Element-wise activations and additions cost one per
//! output; sum pooling costs `kernel_volume − 1` additions per output.

use spider_core::{Error, Result};
use spider_nn::LayerDesc;

pub fn layer_flops(layer: &LayerDesc) -> Result<u64> {
    let out = layer.out_elems as u64;
    let kvol = layer.kernel_volume() as u64;
    match layer.kind.as_str() {
        "conv2d" | "conv3d" | "transposed_conv" | "linear" => Ok(2 * out * kvol * layer.in_channels as u64),
        "lrelu" | "add" | "sigmoid" => Ok(out),
        "sum_pool" => Ok(out * kvol.saturating_sub(1)),
        other => Err(Error::Accounting(format!("no FLOP rule for layer kind '{other}'"))),
    }
}

pub fn count_flops(layers: &[LayerDesc]) -> Result<u64> {
    layers.iter().map(layer_flops).sum()
}

/// Ordinary least-squares line through `(x, y)` and its R².
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

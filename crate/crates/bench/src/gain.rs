//! Sampling-rate gain curve and the quality threshold read off it.

use serde::{Deserialize, Serialize};
use spider_core::data::DatasetSeries;
use spider_core::sampling::{derive_seed, random_selection_rate, rng};
use spider_core::{apply_mask, mae, Error, Reconstructor, Result, SparseMeasurement, StateWindow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    pub rate: f64,
    pub mean_mae: f64,
    pub median_mae: f64,
    /// Relative MAE reduction against the previous rate; 0 for the first.
    pub gain: f64,
}

/// `gain_i = (MAE_{i−1} − MAE_i) / MAE_{i−1}` with `gain_0 = 0`.
pub fn gains(maes: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; maes.len()];
    for i in 1..maes.len() {
        out[i] = if maes[i - 1] == 0.0 { 0.0 } else { (maes[i - 1] - maes[i]) / maes[i - 1] };
    }
    out
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Mean and median MAE per rate over `masks` random draws. Draws are spread
/// evenly over the series and each fixes a timestamp and a seed shared by
/// every rate. `truth` is normalized.
pub fn gain_curve<R: Reconstructor + ?Sized>(truth: &DatasetSeries, reconstructor: &R, rates: &[f64], masks: usize, seed: u64) -> Result<Vec<GainPoint>> {
    if rates.is_empty() || masks == 0 {
        return Err(Error::EmptyInput("gain curve needs rates and masks".into()));
    }
    if rates.windows(2).any(|w| w[1] <= w[0]) || rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::Config(format!("rates must be ascending within [0, 1], got {rates:?}")));
    }
    let frames = reconstructor.window_frames();
    let ts: Vec<i64> = truth.timestamps().skip(frames - 1).collect();
    if ts.is_empty() {
        return Err(Error::Range(format!("series of {} frames is shorter than the {frames}-frame window", truth.len())));
    }
    let g = truth.geometry;
    let draws: Vec<(i64, u64)> = (0..masks).map(|j| (ts[j * ts.len() / masks], derive_seed(seed, j as u64))).collect();
    let mut per_rate = Vec::with_capacity(rates.len());
    for &rate in rates {
        let mut errs = Vec::with_capacity(masks);
        for &(t, s) in &draws {
            let mut r = rng(s);
            let frames = (t - frames as i64 + 1..=t)
                .map(|f| apply_mask(truth.get(f)?, &random_selection_rate(f, g, rate, &mut r)))
                .collect::<Result<Vec<SparseMeasurement>>>()?;
            errs.push(mae(&reconstructor.reconstruct(&StateWindow::new(frames)?)?, truth.get(t)?)?);
        }
        per_rate.push((errs.iter().sum::<f64>() / errs.len() as f64, median(errs)));
    }
    let means: Vec<f64> = per_rate.iter().map(|p| p.0).collect();
    Ok(rates.iter().zip(&per_rate).zip(gains(&means)).map(|((&rate, &(mean_mae, median_mae)), gain)| GainPoint { rate, mean_mae, median_mae, gain }).collect())
}

/// ε = mean MAE at the knee. Without a cutoff the knee is the point at
/// `knee_rate` (nearest available, with a warning); with one it is the first
/// point at or beyond `knee_rate` whose gain is below the cutoff, else the
/// last point.
pub fn choose_threshold(curve: &[GainPoint], knee_rate: f64, cutoff: Option<f64>) -> Result<f64> {
    if curve.is_empty() {
        return Err(Error::EmptyInput("empty gain curve".into()));
    }
    let point = match cutoff {
        None => {
            let p = curve.iter().min_by(|a, b| (a.rate - knee_rate).abs().total_cmp(&(b.rate - knee_rate).abs())).expect("non-empty");
            if (p.rate - knee_rate).abs() > 1e-12 {
                log::warn!("rate {knee_rate} not on the curve; using {}", p.rate);
            }
            p
        }
        Some(c) => curve.iter().find(|p| p.rate >= knee_rate - 1e-12 && p.gain < c).unwrap_or_else(|| curve.last().expect("non-empty")),
    };
    Ok(point.mean_mae)
}

//! Estimates `P(e ≤ ε)` for a reconstruction without ground truth.
//!
//! Each collected value is left out in turn and re-inferred from the rest;
//! the absolute re-inference errors are the observations `O`, and the
//! probability that the underlying error is within `ε` is estimated either
//! by bootstrapping the mean of `O` or by a normal approximation.

use rand::Rng;
use serde::{Deserialize, Serialize};
use spider_core::sampling::rng;
use spider_core::{Error, QualityConfig, Reconstructor, Result, StateWindow};
use statrs::distribution::{ContinuousCDF, Normal};

/// Resamples used by the bootstrap unless told otherwise.
pub const DEFAULT_RESAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooObservations {
    /// Collected values, in cell-index order.
    pub y: Vec<f64>,
    /// Values re-inferred with the cell left out.
    pub y_hat: Vec<f64>,
    /// `|y_hat − y|`.
    pub o: Vec<f64>,
}

impl LooObservations {
    pub fn new(y: Vec<f64>, y_hat: Vec<f64>) -> Result<Self> {
        if y.len() != y_hat.len() {
            return Err(Error::Shape(format!("{} collected vs {} re-inferred values", y.len(), y_hat.len())));
        }
        let o = y.iter().zip(&y_hat).map(|(a, b)| (b - a).abs()).collect();
        Ok(Self { y, y_hat, o })
    }

    /// Observations given directly as absolute errors.
    pub fn from_errors(o: Vec<f64>) -> Result<Self> {
        if o.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain("observations must be finite and non-negative".into()));
        }
        Ok(Self { y: vec![0.0; o.len()], y_hat: o.clone(), o })
    }

    pub fn len(&self) -> usize {
        self.o.len()
    }

    pub fn is_empty(&self) -> bool {
        self.o.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.o.iter().sum::<f64>() / self.o.len() as f64
    }
}

pub fn loo_observations<R: Reconstructor + ?Sized>(window: &StateWindow, reconstructor: &R) -> Result<LooObservations> {
    let current = window.current();
    let cells = current.mask.indices();
    if cells.len() < 2 {
        return Err(Error::InsufficientData(format!("leave-one-out needs at least 2 sampled cells, found {}", cells.len())));
    }
    let mut y = Vec::with_capacity(cells.len());
    let mut y_hat = Vec::with_capacity(cells.len());
    for &cell in &cells {
        let reduced = window.with_current(current.withhold(cell))?;
        let est = reconstructor.reconstruct(&reduced)?;
        y.push(current.values.as_slice()[cell]);
        y_hat.push(est.values.as_slice()[cell]);
    }
    LooObservations::new(y, y_hat)
}

/// Share of `m` with-replacement resample means that are ≤ `epsilon`.
pub fn bootstrap_estimate(obs: &LooObservations, epsilon: f64, m: usize, seed: u64) -> Result<f64> {
    if obs.is_empty() {
        return Err(Error::EmptyInput("no observations to resample".into()));
    }
    if m == 0 {
        return Err(Error::Config("at least one resample is required".into()));
    }
    let n = obs.len();
    let mut r = rng(seed);
    let mut hits = 0usize;
    for _ in 0..m {
        let mut sum = 0.0;
        for _ in 0..n {
            sum += obs.o[r.gen_range(0..n)];
        }
        if sum / n as f64 <= epsilon {
            hits += 1;
        }
    }
    Ok(hits as f64 / m as f64)
}

/// `Φ((ε − μ) / (s / √n))` with `s` the sample standard deviation of `O`.
pub fn normal_posterior_estimate(obs: &LooObservations, epsilon: f64) -> Result<f64> {
    let n = obs.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("normal estimate needs at least 2 observations, found {n}")));
    }
    let mu = obs.mean();
    let var = obs.o.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    if se == 0.0 {
        return Ok(if mu <= epsilon { 1.0 } else { 0.0 });
    }
    let z = (epsilon - mu) / se;
    Ok(Normal::new(0.0, 1.0).expect("standard normal").cdf(z))
}

/// Quality is satisfied when the bootstrap estimate strictly exceeds `β`.
pub fn quality_gate(obs: &LooObservations, config: &QualityConfig, m: usize, seed: u64) -> Result<bool> {
    config.validate()?;
    Ok(bootstrap_estimate(obs, config.epsilon, m, seed)? > config.beta)
}

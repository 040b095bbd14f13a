//! Policy network: the reconstruction trunk with time side-channels and a
//! sigmoid head, trained with binary cross-entropy on agent selections.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use spider_agent::SelectionSample;
use spider_core::sampling::{derive_seed, rng};
use spider_core::{Error, Grid, Result, SelectionMatrix, StateWindow};
use spider_mtrnet::backbone::Backbone;
use spider_mtrnet::{window_input, MtrnetConfig};
use spider_nn::{sigmoid, Act, Adam, AdamConfig, ParamStore};

use crate::Selector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    /// Trunk widths and window length; `keep_measured` is ignored.
    pub net: MtrnetConfig,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self { net: MtrnetConfig::desk(), threshold: 0.5, seed: 0 }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!("threshold must lie in (0, 1), got {}", self.threshold)));
        }
        self.net.backbone_spec(3).validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyHyper {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for PolicyHyper {
    fn default() -> Self {
        Self { learning_rate: 1e-3, batch_size: 8, epochs: 20, seed: 0 }
    }
}

impl PolicyHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch size and epochs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PolicyNet {
    pub config: PolicyConfig,
    pub params: ParamStore,
    net: Backbone,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    config: PolicyConfig,
}

const CLIP: f64 = 1e-7;

/// Mean binary cross-entropy with probabilities clipped to `[1e−7, 1−1e−7]`.
pub fn bce(probs: &[f64], labels: &[bool]) -> f64 {
    let n = probs.len().max(1) as f64;
    probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(CLIP, 1.0 - CLIP);
            if y {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / n
}

/// Min-max normalizes `probs` and keeps cells strictly above `threshold`.
/// A constant (or non-finite) grid selects nothing.
pub fn binarize(probs: &[f64], threshold: f64) -> Vec<bool> {
    let lo = probs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 0.0 && span.is_finite()) {
        log::warn!("probability grid is constant or non-finite; selecting no cells");
        return vec![false; probs.len()];
    }
    probs.iter().map(|&p| (p - lo) / span > threshold).collect()
}

impl PolicyNet {
    pub fn new(config: PolicyConfig) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        let net = Backbone::build(config.net.backbone_spec(3), &mut params, &mut rng(config.seed))?;
        Ok(Self { config, params, net })
    }

    fn input(&self, window: &StateWindow) -> Result<Act> {
        if window.len() != self.config.net.window_frames {
            return Err(Error::Shape(format!("window of {} frames, policy expects {}", window.len(), self.config.net.window_frames)));
        }
        let x = window_input(window, self.config.net.mask_input);
        if !x.all_finite() {
            return Err(Error::Domain("non-finite value in input window".into()));
        }
        Ok(x)
    }

    /// Per-cell selection probabilities.
    pub fn probabilities(&self, window: &StateWindow, time: [f64; 3]) -> Result<Grid> {
        let x = self.input(window)?;
        let out = self.net.forward(&self.params, &x, &time).out;
        let g = window.geometry();
        Grid::from_vec(g.rows, g.cols, out.data.iter().map(|&z| sigmoid(z)).collect())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let text = toml::to_string(&Manifest { config: self.config.clone() }).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(dir.join("manifest.toml"), text)?;
        self.params.save(&dir.join("params"))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.toml");
        let text = std::fs::read_to_string(&path)?;
        let m: Manifest = toml::from_str(&text).map_err(|e| Error::Format { path, message: e.to_string() })?;
        let mut net = Self::new(m.config)?;
        let params = ParamStore::load(&dir.join("params"))?;
        net.params.check_layout(&params)?;
        net.params = params;
        Ok(net)
    }
}

/// Binary selection and the probability grid behind it.
pub fn policy_predict(net: &PolicyNet, window: &StateWindow, time: [f64; 3]) -> Result<(SelectionMatrix, Grid)> {
    let probs = net.probabilities(window, time)?;
    let bits = binarize(probs.as_slice(), net.config.threshold);
    Ok((SelectionMatrix::from_bits(window.t(), window.geometry(), bits)?, probs))
}

impl Selector for PolicyNet {
    fn select(&self, window: &StateWindow, time: [f64; 3]) -> Result<SelectionMatrix> {
        policy_predict(self, window, time).map(|(s, _)| s)
    }
}

/// Mean training BCE per epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyHistory {
    pub epoch_bce: Vec<f64>,
}

/// Minimizes BCE between sigmoid outputs and the agent's selections with
/// Adam on shuffled minibatches.
pub fn policy_train(net: &mut PolicyNet, dataset: &[SelectionSample], hyper: &PolicyHyper) -> Result<PolicyHistory> {
    hyper.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyInput("policy training set is empty".into()));
    }
    let inputs = dataset.iter().map(|s| net.input(&s.window)).collect::<Result<Vec<_>>>()?;
    for s in dataset {
        let (w, l) = (s.window.geometry(), s.label.geometry());
        if !w.same_shape(&l) {
            return Err(Error::Shape(format!("label {}x{} for a {}x{} window", l.rows, l.cols, w.rows, w.cols)));
        }
    }
    let mut opt = Adam::new(AdamConfig { learning_rate: hyper.learning_rate, ..AdamConfig::default() }, &net.params);
    let mut grads = net.params.zero_grads();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut r = rng(derive_seed(hyper.seed, 3));
    let mut epoch_bce = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut r);
        let mut total = 0.0;
        for batch in order.chunks(hyper.batch_size) {
            grads.clear();
            for &i in batch {
                let s = &dataset[i];
                let trace = net.net.forward(&net.params, &inputs[i], &s.time_features);
                let probs: Vec<f64> = trace.out.data.iter().map(|&z| sigmoid(z)).collect();
                total += bce(&probs, s.label.bits());
                let n = probs.len() as f64;
                // d BCE / d logit = (σ(z) − y) / N
                let d = probs.iter().zip(s.label.bits()).map(|(&p, &y)| (p - if y { 1.0 } else { 0.0 }) / n).collect();
                let dout = Act::from_vec(1, trace.out.h, trace.out.w, d);
                net.net.backward(&net.params, &mut grads, &trace, &dout);
            }
            grads.scale(1.0 / batch.len() as f64);
            opt.step(&mut net.params, &grads);
        }
        let mean = total / dataset.len() as f64;
        if !mean.is_finite() || !net.params.all_finite() {
            return Err(Error::Domain(format!("policy training diverged in epoch {epoch}")));
        }
        log::info!("policy epoch {epoch}: BCE {mean:.5}");
        epoch_bce.push(mean);
    }
    Ok(PolicyHistory { epoch_bce })
}

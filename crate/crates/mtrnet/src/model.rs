use std::path::Path;

use serde::{Deserialize, Serialize};
use spider_core::{sampling, Error, NormStats, Reconstructor, Result, StateWindow, TrafficSnapshot};
use spider_nn::{Act, LayerDesc, ParamStore};

use crate::backbone::{Backbone, BackboneSpec, Trace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MtrnetConfig {
    /// Current frame plus history.
    pub window_frames: usize,
    pub n_feature_layers: usize,
    pub lrelu_slope: f64,
    /// `[3D stage, feature stage, summary 1, summary 2]`; the last summary
    /// layer always emits one channel.
    pub channels: Vec<usize>,
    pub pool_factor: usize,
    /// Temporal extent of the 3D kernel.
    pub time_kernel: usize,
    /// Report measured cells of the current frame as measured; the network
    /// fills only the unmeasured ones.
    pub keep_measured: bool,
    /// Feed each frame's selection mask as a second input plane.
    pub mask_input: bool,
}

impl Default for MtrnetConfig {
    fn default() -> Self {
        Self { window_frames: 7, n_feature_layers: 5, lrelu_slope: 0.2, channels: vec![16, 32, 32, 64], pool_factor: 2, time_kernel: 3, keep_measured: true, mask_input: false }
    }
}

impl MtrnetConfig {
    /// Narrower widths for single-core desk experiments.
    pub fn desk() -> Self {
        Self { channels: vec![8, 16, 16, 32], mask_input: true, ..Self::default() }
    }

    pub fn backbone_spec(&self, extra_channels: usize) -> BackboneSpec {
        BackboneSpec {
            frames: self.window_frames,
            in_channels: if self.mask_input { 2 } else { 1 },
            time_kernel: self.time_kernel,
            channels: self.channels.clone(),
            n_feature_layers: self.n_feature_layers,
            pool_factor: self.pool_factor,
            slope: self.lrelu_slope,
            extra_channels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.backbone_spec(0).validate()
    }
}

/// Reconstruction network with its parameters and training normalizer.
#[derive(Debug, Clone)]
pub struct MtrnetModel {
    pub config: MtrnetConfig,
    pub seed: u64,
    pub norm: Option<NormStats>,
    pub params: ParamStore,
    net: Backbone,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    config: MtrnetConfig,
    seed: u64,
    log_mean: Option<f64>,
}

pub fn mtrnet_init(config: &MtrnetConfig, seed: u64) -> Result<MtrnetModel> {
    config.validate()?;
    let mut rng = sampling::rng(seed);
    let mut params = ParamStore::new();
    let net = Backbone::build(config.backbone_spec(0), &mut params, &mut rng)?;
    Ok(MtrnetModel { config: config.clone(), seed, norm: None, params, net })
}

/// Stacks the window's sparse frames (zeros where unsampled) as channels.
/// Value planes oldest first, followed by the mask planes when `mask_planes`.
pub fn window_input(window: &StateWindow, mask_planes: bool) -> Act {
    let g = window.geometry();
    let planes = if mask_planes { 2 } else { 1 };
    let mut data = Vec::with_capacity(planes * window.len() * g.cells());
    for f in window.frames() {
        data.extend_from_slice(f.values.as_slice());
    }
    if mask_planes {
        for f in window.frames() {
            data.extend(f.mask.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }));
        }
    }
    Act::from_vec(planes * window.len(), g.rows, g.cols, data)
}

impl MtrnetModel {
    pub fn backbone(&self) -> &Backbone {
        &self.net
    }

    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    pub fn forward(&self, input: &Act) -> Trace {
        self.net.forward(&self.params, input, &[])
    }

    /// Raw (unclipped) output for a window, after shape and finiteness checks.
    pub fn predict_raw(&self, window: &StateWindow) -> Result<Act> {
        if window.len() != self.config.window_frames {
            return Err(Error::Shape(format!("window of {} frames, model expects {}", window.len(), self.config.window_frames)));
        }
        let x = window_input(window, self.config.mask_input);
        if !x.all_finite() {
            return Err(Error::Domain("non-finite value in input window".into()));
        }
        Ok(self.forward(&x).out)
    }

    pub fn layer_descs(&self, rows: usize, cols: usize) -> Vec<LayerDesc> {
        self.net.layer_descs(rows, cols)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let m = Manifest { config: self.config.clone(), seed: self.seed, log_mean: self.norm.map(|n| n.log_mean) };
        let text = toml::to_string(&m).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(dir.join("manifest.toml"), text)?;
        self.params.save(&dir.join("params"))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.toml");
        let text = std::fs::read_to_string(&path)?;
        let m: Manifest = toml::from_str(&text).map_err(|e| Error::Format { path, message: e.to_string() })?;
        let mut model = mtrnet_init(&m.config, m.seed)?;
        let params = ParamStore::load(&dir.join("params"))?;
        model.params.check_layout(&params)?;
        model.params = params;
        model.norm = m.log_mean.map(NormStats::new).transpose()?;
        Ok(model)
    }
}

/// Full-map estimate in normalized space, clipped at zero.
pub fn mtrnet_infer(model: &MtrnetModel, window: &StateWindow) -> Result<TrafficSnapshot> {
    let out = model.predict_raw(window)?;
    let g = window.geometry();
    let current = window.current();
    let values = out
        .data
        .iter()
        .enumerate()
        .map(|(k, v)| if model.config.keep_measured && current.mask.is_set(k) { current.values.as_slice()[k] } else { v.max(0.0) })
        .collect();
    let values = spider_core::Grid::from_vec(g.rows, g.cols, values)?;
    if !values.all_finite() {
        return Err(Error::Domain("network produced a non-finite estimate".into()));
    }
    TrafficSnapshot::new(window.t(), values)
}

impl Reconstructor for MtrnetModel {
    fn reconstruct(&self, window: &StateWindow) -> Result<TrafficSnapshot> {
        mtrnet_infer(self, window)
    }

    fn window_frames(&self) -> usize {
        self.config.window_frames
    }
}

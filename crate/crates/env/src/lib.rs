//! Cell selection as an episodic task.
//!
//! An episode covers one timestamp `t`. The state is the window of
//! historical sparse frames plus the partially collected current frame;
//! an action reveals one more cell; the reward is the negative MAE of the
//! reconstruction against the full (normalized) snapshot, and the episode
//! ends once that MAE drops below `ε`. The discount is fixed at zero, so the
//! per-step objective is the immediate reward.

mod log;

use std::collections::HashMap;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use spider_core::data::DatasetSeries;
use spider_core::sampling::rng;
use spider_core::{mae, Clock, Error, GridGeometry, NormStats, QualityConfig, Reconstructor, Result, SparseMeasurement, StateWindow, TrafficSnapshot};

pub use log::{read_episode_logs, write_episode_logs, EpisodeLog};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub geometry: GridGeometry,
    pub window_frames: usize,
    pub quality: QualityConfig,
    /// Share of cells that cannot be sampled in an episode.
    #[serde(default)]
    pub unavailable_fraction: f64,
    /// Always 0.
    #[serde(default)]
    pub gamma: f64,
}

impl EnvConfig {
    pub fn new(geometry: GridGeometry, window_frames: usize, quality: QualityConfig) -> Self {
        Self { geometry, window_frames, quality, unavailable_fraction: 0.0, gamma: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        self.quality.validate()?;
        if self.window_frames == 0 {
            return Err(Error::Config("window must hold at least one frame".into()));
        }
        if !(0.0..1.0).contains(&self.unavailable_fraction) {
            return Err(Error::Config(format!("unavailable fraction must lie in [0, 1), got {}", self.unavailable_fraction)));
        }
        if self.gamma != 0.0 {
            return Err(Error::Config(format!("only gamma = 0 is supported, got {}", self.gamma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub window: StateWindow,
    /// Chosen cells in selection order.
    pub selected: Vec<usize>,
    pub unavailable: Vec<bool>,
    pub t: i64,
    pub time_features: [f64; 3],
}

impl EnvState {
    pub fn iteration(&self) -> usize {
        self.selected.len()
    }

    pub fn current(&self) -> &SparseMeasurement {
        self.window.current()
    }

    pub fn is_available(&self, cell: usize) -> bool {
        cell < self.unavailable.len() && !self.unavailable[cell] && !self.current().mask.is_set(cell)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub mae: f64,
    pub selected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: EnvState,
    pub reward: f64,
    pub done: bool,
    /// Ended because no cell was left, not because the error target was met.
    pub truncated: bool,
    pub info: StepInfo,
}

/// Environment over one series; owns the normalized ground truth and the
/// finalized frames of completed episodes.
pub struct Environment<R> {
    config: EnvConfig,
    truth: DatasetSeries,
    clock: Clock,
    reconstructor: R,
    finalized: HashMap<i64, SparseMeasurement>,
}

impl<R: Reconstructor> Environment<R> {
    /// `series` is raw traffic; it is normalized with `norm`.
    pub fn new(series: &DatasetSeries, norm: &NormStats, config: EnvConfig, reconstructor: R) -> Result<Self> {
        config.validate()?;
        if !series.geometry.same_shape(&config.geometry) {
            return Err(Error::Shape(format!("series grid {:?} vs configured {:?}", series.geometry, config.geometry)));
        }
        if reconstructor.window_frames() > config.window_frames {
            return Err(Error::Config(format!(
                "reconstructor needs {} frames but the window holds {}",
                reconstructor.window_frames(),
                config.window_frames
            )));
        }
        let truth = series.normalized(norm)?;
        let clock = series.clock();
        Ok(Self { config, truth, clock, reconstructor, finalized: HashMap::new() })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn reconstructor(&self) -> &R {
        &self.reconstructor
    }

    pub fn timestamps(&self) -> Vec<i64> {
        self.truth.timestamps().collect()
    }

    /// Normalized ground truth at `t`.
    pub fn truth(&self, t: i64) -> Result<&TrafficSnapshot> {
        self.truth.get(t)
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    /// Records the final frame of an episode as history for later episodes.
    pub fn commit(&mut self, state: &EnvState) {
        self.finalized.insert(state.t, state.current().clone());
    }

    pub fn finalized(&self, t: i64) -> Option<&SparseMeasurement> {
        self.finalized.get(&t)
    }

    pub fn clear_history(&mut self) {
        self.finalized.clear();
    }

    /// History frames are finalized frames where available, empty otherwise;
    /// the current frame starts empty.
    pub fn reset(&self, t: i64, seed: u64) -> Result<EnvState> {
        self.truth(t)?;
        let g = self.config.geometry;
        let n = self.config.window_frames as i64;
        let mut frames = Vec::with_capacity(n as usize);
        for past in (t - n + 1)..t {
            let mut f = self.finalized.get(&past).cloned().unwrap_or_else(|| SparseMeasurement::empty(past, g));
            f.t = past;
            f.mask.t = past;
            frames.push(f);
        }
        frames.push(SparseMeasurement::empty(t, g));
        let cells = g.cells();
        let k = (self.config.unavailable_fraction * cells as f64).round() as usize;
        let mut unavailable = vec![false; cells];
        if k > 0 {
            for i in index::sample(&mut rng(seed), cells, k).iter() {
                unavailable[i] = true;
            }
        }
        Ok(EnvState { window: StateWindow::new(frames)?, selected: Vec::new(), unavailable, t, time_features: self.clock.time_features(t) })
    }

    pub fn action_space(&self, state: &EnvState) -> Vec<usize> {
        (0..state.unavailable.len()).filter(|&c| state.is_available(c)).collect()
    }

    /// Reconstruction MAE of a window against the truth at its timestamp.
    pub fn score(&self, window: &StateWindow) -> Result<f64> {
        let need = self.reconstructor.window_frames();
        let est = if need < window.len() { self.reconstructor.reconstruct(&window.tail(need)?)? } else { self.reconstructor.reconstruct(window)? };
        mae(&est, self.truth(window.t())?)
    }

    /// Pure transition: the input state is left untouched.
    pub fn step(&self, state: &EnvState, action: usize) -> Result<StepResult> {
        if !state.is_available(action) {
            return Err(Error::InvalidAction(format!("cell {action} is already selected, unavailable or off-grid")));
        }
        let value = self.truth(state.t)?.values.as_slice()[action];
        let window = state.window.with_current(state.current().reveal(action, value))?;
        let m = self.score(&window)?;
        let mut next = state.clone();
        next.window = window;
        next.selected.push(action);
        let met = m < self.config.quality.epsilon;
        let exhausted = !met && self.action_space(&next).is_empty();
        Ok(StepResult { reward: -m, done: met || exhausted, truncated: exhausted, info: StepInfo { mae: m, selected: next.selected.len() }, next_state: next })
    }
}

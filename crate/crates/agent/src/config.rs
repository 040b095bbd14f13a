use serde::{Deserialize, Serialize};
use spider_core::{Error, GridGeometry, Result};

use crate::net::AgentNetConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    /// Candidate subset size.
    pub k: usize,
    pub prev_actions_len: usize,
    pub net: AgentNetConfig,
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Multiplies the completed-episode count before it enters η.
    pub x_scale: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self { k: 16, prev_actions_len: 20, net: AgentNetConfig::default(), seed: 0, epochs: 1, learning_rate: 1e-3, x_scale: 1.0 }
    }
}

impl AgentConfig {
    /// Candidate subset size used on the full-resolution deployment grid.
    pub fn milan() -> Self {
        Self { k: 64, ..Self::default() }
    }

    pub fn validate(&self, geometry: GridGeometry) -> Result<()> {
        if self.k == 0 || self.k > geometry.cells() {
            return Err(Error::Config(format!("k must be in [1, {}], got {}", geometry.cells(), self.k)));
        }
        if self.prev_actions_len == 0 {
            return Err(Error::Config("prev_actions_len must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.x_scale >= 0.0 && self.x_scale.is_finite()) {
            return Err(Error::Config(format!("x_scale must be non-negative, got {}", self.x_scale)));
        }
        Ok(())
    }
}
